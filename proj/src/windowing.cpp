#include "iotfx/windowing.hpp"

#include <algorithm>
#include <cmath>

namespace iotfx {

std::int64_t window_length_nanos(double seconds)
{
    if (!(seconds > 0) || !std::isfinite(seconds) || seconds > 9.2e9)
        throw WindowError(WindowError::kind::non_positive_window, "window duration must be positive");
    auto ns = static_cast<std::int64_t>(std::llround(seconds * 1e9));
    if (ns <= 0)
        throw WindowError(WindowError::kind::non_positive_window, "window duration below one nanosecond");
    return ns;
}

std::int64_t window_index(const Timestamp& ts, const Timestamp& t0, std::int64_t window_ns)
{
    if (window_ns <= 0)
        throw WindowError(WindowError::kind::non_positive_window, "window duration must be positive");
    if (ts < t0) throw WindowError(WindowError::kind::negative_offset, "timestamp precedes window origin");
    return nanos_between(ts, t0) / window_ns;
}

std::int64_t window_index(const Timestamp& ts, const Timestamp& t0, double window_seconds)
{
    return window_index(ts, t0, window_length_nanos(window_seconds));
}

WindowAssembler::WindowAssembler(double window_seconds, Timestamp origin)
    : origin_(origin), window_ns_(window_length_nanos(window_seconds))
{
}

void WindowAssembler::set_empty_window_devices(std::vector<MacAddress> devices)
{
    std::sort(devices.begin(), devices.end());
    devices.erase(std::unique(devices.begin(), devices.end()), devices.end());
    empty_devices_ = std::move(devices);
}

std::vector<CompletedWindow> WindowAssembler::ingest(const PacketRecord& record)
{
    ++ingested_;
    if (record.timestamp < origin_ || watermark_ == flushed) {
        ++late_drops_;
        return {};
    }
    const std::int64_t idx = nanos_between(record.timestamp, origin_) / window_ns_;
    if (idx <= watermark_) {
        ++late_drops_;
        return {};
    }

    auto& cell = cells_[WindowKey{idx, record.device_mac}];
    // Keep the cell sorted; capture order is almost always already ascending.
    auto pos = std::upper_bound(cell.begin(), cell.end(), record.timestamp,
                                [](const Timestamp& t, const PacketRecord& r) { return t < r.timestamp; });
    cell.insert(pos, record);

    return advance_to(idx);
}

std::vector<CompletedWindow> WindowAssembler::advance_to(std::int64_t index)
{
    if (watermark_ == flushed || index - 1 <= watermark_) return {};
    return close_below(index, index - 1);
}

std::vector<CompletedWindow> WindowAssembler::flush_all()
{
    if (watermark_ == flushed) return {};
    std::int64_t last = watermark_;
    if (!cells_.empty()) last = std::max(last, std::prev(cells_.end())->first.window_index);
    auto out = close_below(last + 1, last);
    watermark_ = flushed;
    return out;
}

std::vector<CompletedWindow> WindowAssembler::close_below(std::int64_t index, std::int64_t new_watermark)
{
    std::vector<CompletedWindow> out;
    const std::int64_t first_elapsed = watermark_ + 1;

    auto emit_empty_until = [&](std::int64_t stop_idx, std::int64_t& next_idx) {
        for (; next_idx < stop_idx; ++next_idx)
            for (const auto& mac : empty_devices_)
                out.push_back(finish(WindowKey{next_idx, mac}, {}));
    };

    std::int64_t next_empty = first_elapsed;
    auto it = cells_.begin();
    while (it != cells_.end() && it->first.window_index < index) {
        const std::int64_t idx = it->first.window_index;
        if (!empty_devices_.empty()) {
            emit_empty_until(idx, next_empty);
            // Interleave zero rows for silent devices within this index.
            std::vector<CompletedWindow> row;
            auto devices = empty_devices_.begin();
            while (it != cells_.end() && it->first.window_index == idx) {
                while (devices != empty_devices_.end() && *devices < it->first.device_mac)
                    out.push_back(finish(WindowKey{idx, *devices++}, {}));
                if (devices != empty_devices_.end() && *devices == it->first.device_mac) ++devices;
                out.push_back(finish(it->first, std::move(it->second)));
                it = cells_.erase(it);
            }
            for (; devices != empty_devices_.end(); ++devices)
                out.push_back(finish(WindowKey{idx, *devices}, {}));
            next_empty = idx + 1;
        } else {
            out.push_back(finish(it->first, std::move(it->second)));
            it = cells_.erase(it);
        }
    }
    if (!empty_devices_.empty()) emit_empty_until(index, next_empty);

    watermark_ = std::max(watermark_, new_watermark);
    return out;
}

CompletedWindow WindowAssembler::finish(const WindowKey& key, std::vector<PacketRecord> packets) const
{
    CompletedWindow w;
    w.key = key;
    w.start_time = Timestamp::from_nanos(origin_.to_nanos() + key.window_index * window_ns_);
    w.length_ns = window_ns_;
    w.packets = std::move(packets);
    return w;
}

} // namespace iotfx
