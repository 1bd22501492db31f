#pragma once

// Classic libpcap trace files: reading, plus writing for test fixtures.
//
// Global header (24 bytes): magic, version 2.4, thiszone, sigfigs, snaplen,
// linktype. Each record: ts_sec, ts_frac, caplen, origlen (16 bytes) + data.

#include "iotfx/types.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace iotfx::pcap {

inline constexpr std::uint32_t magic_usec = 0xa1b2c3d4;
inline constexpr std::uint32_t magic_nsec = 0xa1b23c4d;

inline constexpr std::uint32_t linktype_ethernet = 1;
inline constexpr std::uint32_t linktype_raw = 101;

enum class byte_order : std::uint8_t { native, swapped };
enum class ts_resolution : std::uint8_t { microsecond, nanosecond };

struct TraceHeader
{
    byte_order order = byte_order::native;
    ts_resolution resolution = ts_resolution::microsecond;
    std::uint32_t link_type = linktype_ethernet;
    std::uint32_t snap_len = 65535;

    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct RawFrame
{
    Timestamp timestamp;
    std::uint32_t captured_len = 0;
    std::uint32_t original_len = 0;
    std::vector<std::uint8_t> data;

    friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

enum class errc {
    unknown_magic,
    truncated_header,
    truncated_frame,
    corrupt_record,
    invariant_violation,
};

class TraceError : public std::runtime_error
{
public:
    TraceError(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

/// Sequential cursor over one trace stream. Not thread-safe.
class TraceReader
{
public:
    /// Reads and validates the global header. Throws TraceError.
    explicit TraceReader(std::istream& source);

    const TraceHeader& header() const { return header_; }

    /// Next frame, or nullopt at end of stream. A truncated or corrupt record
    /// throws TraceError once; every later call returns nullopt.
    std::optional<RawFrame> next_frame();

    std::uint64_t frames_read() const { return frames_read_; }

private:
    std::uint32_t load32(const std::uint8_t* p) const;

    std::istream* in_;
    TraceHeader header_;
    bool done_ = false;
    std::uint64_t frames_read_ = 0;
};

inline TraceReader open_trace(std::istream& source) { return TraceReader(source); }

/// Serializes a trace. Throws TraceError(invariant_violation) if a frame is
/// inconsistent with the header or cannot be represented at its resolution.
std::vector<std::uint8_t> write_trace(const TraceHeader& header, std::span<const RawFrame> frames);

/// Convenience for fixtures: a frame with captured_len = original_len = data.size().
RawFrame make_frame(Timestamp ts, std::vector<std::uint8_t> data);

} // namespace iotfx::pcap
