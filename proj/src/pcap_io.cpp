#include "iotfx/pcap_io.hpp"

#include <bit>
#include <cstring>

namespace iotfx::pcap {

namespace {

constexpr std::uint32_t bswap32(std::uint32_t v)
{
    return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}

constexpr std::uint16_t bswap16(std::uint16_t v)
{
    return static_cast<std::uint16_t>((v << 8) | (v >> 8));
}

std::uint32_t load_native32(const std::uint8_t* p)
{
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

// Reads exactly n bytes; returns the number actually read.
std::size_t read_some(std::istream& in, std::uint8_t* dst, std::size_t n)
{
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount());
}

} // namespace

TraceReader::TraceReader(std::istream& source) : in_(&source)
{
    std::uint8_t raw[24];
    std::size_t got = read_some(*in_, raw, 4);
    if (got < 4) throw TraceError(errc::truncated_header, "pcap: stream shorter than magic number");

    const std::uint32_t magic = load_native32(raw);
    switch (magic) {
    case magic_usec:
        header_.order = byte_order::native;
        header_.resolution = ts_resolution::microsecond;
        break;
    case bswap32(magic_usec):
        header_.order = byte_order::swapped;
        header_.resolution = ts_resolution::microsecond;
        break;
    case magic_nsec:
        header_.order = byte_order::native;
        header_.resolution = ts_resolution::nanosecond;
        break;
    case bswap32(magic_nsec):
        header_.order = byte_order::swapped;
        header_.resolution = ts_resolution::nanosecond;
        break;
    default:
        throw TraceError(errc::unknown_magic, "pcap: unknown magic number");
    }

    if (read_some(*in_, raw + 4, 20) < 20)
        throw TraceError(errc::truncated_header, "pcap: truncated global header");

    header_.snap_len = load32(raw + 16);
    header_.link_type = load32(raw + 20) & 0x0fffffff; // upper bits carry FCS info
    if (header_.snap_len == 0)
        throw TraceError(errc::truncated_header, "pcap: snap length is zero");
}

std::uint32_t TraceReader::load32(const std::uint8_t* p) const
{
    std::uint32_t v = load_native32(p);
    return header_.order == byte_order::swapped ? bswap32(v) : v;
}

std::optional<RawFrame> TraceReader::next_frame()
{
    if (done_) return std::nullopt;

    std::uint8_t rec[16];
    std::size_t got = read_some(*in_, rec, sizeof rec);
    if (got == 0) {
        done_ = true;
        return std::nullopt;
    }
    if (got < sizeof rec) {
        done_ = true;
        throw TraceError(errc::truncated_frame, "pcap: truncated record header");
    }

    const std::uint32_t ts_sec = load32(rec);
    const std::uint32_t ts_frac = load32(rec + 4);
    const std::uint32_t caplen = load32(rec + 8);
    const std::uint32_t origlen = load32(rec + 12);

    const std::uint32_t frac_limit =
        header_.resolution == ts_resolution::microsecond ? 1'000'000u : 1'000'000'000u;
    if (caplen > origlen || caplen > header_.snap_len || ts_frac >= frac_limit) {
        done_ = true;
        throw TraceError(errc::corrupt_record, "pcap: record header violates trace invariants");
    }

    RawFrame frame;
    frame.timestamp.sec = ts_sec;
    frame.timestamp.nsec =
        header_.resolution == ts_resolution::microsecond ? ts_frac * 1000u : ts_frac;
    frame.captured_len = caplen;
    frame.original_len = origlen;
    frame.data.resize(caplen);
    if (read_some(*in_, frame.data.data(), caplen) < caplen) {
        done_ = true;
        throw TraceError(errc::truncated_frame, "pcap: record data shorter than caplen");
    }
    ++frames_read_;
    return frame;
}

std::vector<std::uint8_t> write_trace(const TraceHeader& header, std::span<const RawFrame> frames)
{
    if (header.snap_len == 0) throw TraceError(errc::invariant_violation, "pcap: snap length is zero");

    const bool swap = header.order == byte_order::swapped;
    std::vector<std::uint8_t> out;
    out.reserve(24 + frames.size() * 16);

    auto put32 = [&](std::uint32_t v) {
        if (swap) v = bswap32(v);
        std::uint8_t b[4];
        std::memcpy(b, &v, 4);
        out.insert(out.end(), b, b + 4);
    };
    auto put16 = [&](std::uint16_t v) {
        if (swap) v = bswap16(v);
        std::uint8_t b[2];
        std::memcpy(b, &v, 2);
        out.insert(out.end(), b, b + 2);
    };

    put32(header.resolution == ts_resolution::microsecond ? magic_usec : magic_nsec);
    put16(2);
    put16(4);
    put32(0); // thiszone
    put32(0); // sigfigs
    put32(header.snap_len);
    put32(header.link_type);

    for (const auto& f : frames) {
        if (f.captured_len > f.original_len || f.captured_len > header.snap_len
            || f.captured_len != f.data.size())
            throw TraceError(errc::invariant_violation, "pcap: frame lengths inconsistent");
        if (f.timestamp.sec < 0 || f.timestamp.sec > 0xffffffffLL || f.timestamp.nsec >= 1'000'000'000u)
            throw TraceError(errc::invariant_violation, "pcap: timestamp out of range");
        std::uint32_t frac = f.timestamp.nsec;
        if (header.resolution == ts_resolution::microsecond) {
            if (frac % 1000 != 0)
                throw TraceError(errc::invariant_violation,
                                 "pcap: sub-microsecond timestamp in microsecond trace");
            frac /= 1000;
        }
        put32(static_cast<std::uint32_t>(f.timestamp.sec));
        put32(frac);
        put32(f.captured_len);
        put32(f.original_len);
        out.insert(out.end(), f.data.begin(), f.data.end());
    }
    return out;
}

RawFrame make_frame(Timestamp ts, std::vector<std::uint8_t> data)
{
    RawFrame f;
    f.timestamp = ts;
    f.captured_len = static_cast<std::uint32_t>(data.size());
    f.original_len = f.captured_len;
    f.data = std::move(data);
    return f;
}

} // namespace iotfx::pcap
