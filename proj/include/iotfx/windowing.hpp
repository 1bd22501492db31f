#pragma once

#include "iotfx/packet_decode.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace iotfx {

class WindowError : public std::invalid_argument
{
public:
    enum class kind { non_positive_window, negative_offset };
    WindowError(kind k, const std::string& what) : std::invalid_argument(what), kind_(k) {}
    kind error_kind() const noexcept { return kind_; }

private:
    kind kind_;
};

/// Window length in whole nanoseconds; throws NonPositiveWindow if the
/// duration rounds to zero or is not a positive finite number.
std::int64_t window_length_nanos(double seconds);

/// floor((ts - t0) / W) in exact integer arithmetic. Throws NegativeOffset if ts < t0.
std::int64_t window_index(const Timestamp& ts, const Timestamp& t0, std::int64_t window_ns);
std::int64_t window_index(const Timestamp& ts, const Timestamp& t0, double window_seconds);

struct WindowKey
{
    std::int64_t window_index = 0;
    MacAddress device_mac;

    friend auto operator<=>(const WindowKey&, const WindowKey&) = default;
    friend bool operator==(const WindowKey&, const WindowKey&) = default;
};

struct CompletedWindow
{
    WindowKey key;
    Timestamp start_time;
    std::int64_t length_ns = 0;
    std::vector<PacketRecord> packets; // ascending timestamp, ties in arrival order
};

/// Groups per-device records into globally aligned half-open windows and
/// emits them once the data (or a clock) moves past them.
class WindowAssembler
{
public:
    static constexpr std::int64_t flushed = std::numeric_limits<std::int64_t>::max();

    WindowAssembler(double window_seconds, Timestamp origin);

    /// Devices that get an all-zero window for every elapsed index with no traffic.
    void set_empty_window_devices(std::vector<MacAddress> devices);

    /// Adds a record; returns every window closed by its arrival, in
    /// (window_index, device_mac) order. Late records are dropped and counted.
    std::vector<CompletedWindow> ingest(const PacketRecord& record);

    /// Closes every window whose index is below `index` (clock-driven flushing).
    std::vector<CompletedWindow> advance_to(std::int64_t index);

    /// Closes everything; later records are all late.
    std::vector<CompletedWindow> flush_all();

    Timestamp origin() const { return origin_; }
    std::int64_t window_ns() const { return window_ns_; }
    std::int64_t watermark() const { return watermark_; }
    std::uint64_t late_drop_count() const { return late_drops_; }
    std::uint64_t ingested_count() const { return ingested_; }
    std::size_t open_cells() const { return cells_.size(); }

private:
    std::vector<CompletedWindow> close_below(std::int64_t index, std::int64_t new_watermark);
    CompletedWindow finish(const WindowKey& key, std::vector<PacketRecord> packets) const;

    Timestamp origin_;
    std::int64_t window_ns_;
    std::int64_t watermark_ = -1;
    std::uint64_t late_drops_ = 0;
    std::uint64_t ingested_ = 0;
    std::map<WindowKey, std::vector<PacketRecord>> cells_;
    std::vector<MacAddress> empty_devices_;
};

} // namespace iotfx
