#include "iotfx/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace iotfx::fixtures {

namespace {

void put16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v)
{
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v & 0xff);
}

std::size_t ethernet(std::vector<std::uint8_t>& b, const L2& l2, std::uint16_t ethertype)
{
    b.resize(14 + (l2.vlan ? 4 : 0));
    std::copy(l2.dst.bytes().begin(), l2.dst.bytes().end(), b.begin());
    std::copy(l2.src.bytes().begin(), l2.src.bytes().end(), b.begin() + 6);
    std::size_t at = 12;
    if (l2.vlan) {
        put16(b, at, 0x8100);
        put16(b, at + 2, *l2.vlan & 0x0fff);
        at += 4;
    }
    put16(b, at, ethertype);
    return at + 2;
}

void ipv4_checksum(std::vector<std::uint8_t>& b, std::size_t at, std::size_t ihl)
{
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i < ihl; i += 2) sum += static_cast<std::uint32_t>((b[at + i] << 8) | b[at + i + 1]);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    put16(b, at + 10, static_cast<std::uint16_t>(~sum));
}

std::size_t ipv4(std::vector<std::uint8_t>& b, std::size_t at, const IpAddress& src, const IpAddress& dst,
                 std::uint8_t proto, std::uint32_t l4_len, std::uint32_t options_len)
{
    if (options_len % 4 || options_len > 40) throw std::invalid_argument("ipv4 options must be 0..40, multiple of 4");
    const std::size_t ihl = 20 + options_len;
    b.resize(at + ihl, 0);
    b[at] = static_cast<std::uint8_t>(0x40 | (ihl / 4));
    put16(b, at + 2, static_cast<std::uint16_t>(ihl + l4_len));
    put16(b, at + 6, 0x4000); // DF
    b[at + 8] = 64;
    b[at + 9] = proto;
    std::copy_n(src.bytes().begin(), 4, b.begin() + static_cast<std::ptrdiff_t>(at + 12));
    std::copy_n(dst.bytes().begin(), 4, b.begin() + static_cast<std::ptrdiff_t>(at + 16));
    for (std::size_t i = 20; i < ihl; ++i) b[at + i] = 1; // NOP options
    ipv4_checksum(b, at, ihl);
    return at + ihl;
}

std::size_t ipv6(std::vector<std::uint8_t>& b, std::size_t at, const IpAddress& src, const IpAddress& dst,
                 std::uint8_t proto, std::uint32_t l4_len, bool hop_by_hop)
{
    b.resize(at + 40 + (hop_by_hop ? 8 : 0), 0);
    b[at] = 0x60;
    put16(b, at + 4, static_cast<std::uint16_t>(l4_len + (hop_by_hop ? 8 : 0)));
    b[at + 6] = hop_by_hop ? 0 : proto;
    b[at + 7] = 64;
    std::copy_n(src.bytes().begin(), 16, b.begin() + static_cast<std::ptrdiff_t>(at + 8));
    std::copy_n(dst.bytes().begin(), 16, b.begin() + static_cast<std::ptrdiff_t>(at + 24));
    if (hop_by_hop) {
        b[at + 40] = proto;
        b[at + 41] = 0; // 8 bytes total
        b[at + 42] = 1; // PadN option filling the rest
        b[at + 43] = 4;
        return at + 48;
    }
    return at + 40;
}

void tcp(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t sport, std::uint16_t dport,
         std::uint32_t payload_len, std::uint32_t header_len)
{
    if (header_len % 4 || header_len < 20 || header_len > 60)
        throw std::invalid_argument("tcp header length must be 20..60, multiple of 4");
    b.resize(at + header_len + payload_len, 0);
    put16(b, at, sport);
    put16(b, at + 2, dport);
    b[at + 12] = static_cast<std::uint8_t>((header_len / 4) << 4);
    b[at + 13] = 0x18; // PSH|ACK
    put16(b, at + 14, 65535);
    for (std::size_t i = 20; i < header_len; ++i) b[at + i] = 1; // NOP options
}

void udp(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t sport, std::uint16_t dport,
         std::uint32_t payload_len)
{
    b.resize(at + 8 + payload_len, 0);
    put16(b, at, sport);
    put16(b, at + 2, dport);
    put16(b, at + 4, static_cast<std::uint16_t>(8 + payload_len));
}

} // namespace

std::vector<std::uint8_t> tcp4_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len, std::uint32_t tcp_header_len,
                                     std::uint32_t ip_options_len)
{
    std::vector<std::uint8_t> b;
    auto at = ethernet(b, l2, 0x0800);
    at = ipv4(b, at, src, dst, 6, tcp_header_len + payload_len, ip_options_len);
    tcp(b, at, sport, dport, payload_len, tcp_header_len);
    return b;
}

std::vector<std::uint8_t> udp4_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len)
{
    std::vector<std::uint8_t> b;
    auto at = ethernet(b, l2, 0x0800);
    at = ipv4(b, at, src, dst, 17, 8 + payload_len, 0);
    udp(b, at, sport, dport, payload_len);
    return b;
}

std::vector<std::uint8_t> tcp6_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len, bool hop_by_hop)
{
    std::vector<std::uint8_t> b;
    auto at = ethernet(b, l2, 0x86dd);
    at = ipv6(b, at, src, dst, 6, 20 + payload_len, hop_by_hop);
    tcp(b, at, sport, dport, payload_len, 20);
    return b;
}

std::vector<std::uint8_t> udp6_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len, bool hop_by_hop)
{
    std::vector<std::uint8_t> b;
    auto at = ethernet(b, l2, 0x86dd);
    at = ipv6(b, at, src, dst, 17, 8 + payload_len, hop_by_hop);
    udp(b, at, sport, dport, payload_len);
    return b;
}

std::vector<std::uint8_t> arp_frame(const MacAddress& src, const IpAddress& sender, const IpAddress& target)
{
    std::vector<std::uint8_t> b;
    auto at = ethernet(b, {src, MacAddress({0xff, 0xff, 0xff, 0xff, 0xff, 0xff}), std::nullopt}, 0x0806);
    b.resize(60, 0);
    put16(b, at, 1);          // htype ethernet
    put16(b, at + 2, 0x0800); // ptype ipv4
    b[at + 4] = 6;
    b[at + 5] = 4;
    put16(b, at + 6, 1); // request
    std::copy(src.bytes().begin(), src.bytes().end(), b.begin() + static_cast<std::ptrdiff_t>(at + 8));
    std::copy_n(sender.bytes().begin(), 4, b.begin() + static_cast<std::ptrdiff_t>(at + 14));
    std::copy_n(target.bytes().begin(), 4, b.begin() + static_cast<std::ptrdiff_t>(at + 24));
    return b;
}

MacAddress mac(const char* text)
{
    auto m = MacAddress::parse(text);
    if (!m) throw std::invalid_argument(std::string("bad MAC literal ") + text);
    return *m;
}

IpAddress ip(const char* text)
{
    auto a = IpAddress::parse(text);
    if (!a) throw std::invalid_argument(std::string("bad IP literal ") + text);
    return *a;
}

std::vector<pcap::RawFrame> synthesize(const SynthOptions& o)
{
    std::mt19937_64 rng(o.seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto uniform_int = [&](std::uint32_t lo, std::uint32_t hi) {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
    };

    const std::int64_t start_ns = o.start.to_nanos();
    const std::int64_t end_ns = start_ns + static_cast<std::int64_t>(std::llround(o.duration_s * 1e9));
    struct Pending
    {
        std::int64_t ns;
        std::uint64_t seq;
        std::vector<std::uint8_t> data;
    };
    std::vector<Pending> pending;
    std::uint64_t seq = 0;

    // Microsecond timestamps so the result is representable in a classic pcap.
    auto add = [&](double offset_s, std::vector<std::uint8_t> data) {
        std::int64_t us = static_cast<std::int64_t>(std::floor(offset_s * 1e6));
        std::int64_t ns = start_ns + us * 1000;
        if (ns < start_ns || ns >= end_ns) return;
        pending.push_back({ns, seq++, std::move(data)});
    };

    const int slots = static_cast<int>(std::ceil(o.duration_s));
    for (std::size_t d = 0; d < o.devices.size(); ++d) {
        const auto& dev = o.devices[d];
        const L2 up{dev.mac, o.gateway_mac, std::nullopt};
        const L2 down{o.gateway_mac, dev.mac, std::nullopt};
        const auto local_port = static_cast<std::uint16_t>(50000 + d * 11);

        for (int s = 0; s < slots; ++s) {
            if (dev.kind == TrafficKind::chatty) {
                if (uniform(0, 1) >= dev.duty) continue;
                const int burst = static_cast<int>(uniform_int(2, 8));
                for (int i = 0; i < burst; ++i) {
                    double t = s + uniform(0, 0.999);
                    if (i == 0)
                        add(t, udp4_frame(up, dev.ip, o.remote_ip, static_cast<std::uint16_t>(40000 + s), 53,
                                          uniform_int(20, 60)));
                    else if (i % 3 == 0)
                        add(t, tcp6_frame(up, ip("fd00::10"), ip("2001:db8::443"), local_port, 443,
                                          uniform_int(0, 900), i % 2 == 0));
                    else
                        add(t, tcp4_frame(up, dev.ip, o.remote_ip, local_port, 443, uniform_int(0, 1200)));
                    add(t + uniform(0.001, 0.05), tcp4_frame(down, o.remote_ip, dev.ip, 443, local_port,
                                                             uniform_int(0, 1400)));
                }
                continue;
            }

            const int ul = std::max(1, static_cast<int>(std::lround(dev.ul_pps)));
            for (int i = 0; i < ul; ++i) {
                double t = s + (i + uniform(0, 0.9)) / ul;
                if (d == 0 && s == 0 && i == 0) t = 0; // pins the window origin
                std::uint32_t payload;
                switch (dev.kind) {
                case TrafficKind::bulk_udp:
                    payload = 1472;
                    add(t, udp4_frame(up, dev.ip, o.remote_ip, local_port, 5201, payload));
                    break;
                case TrafficKind::video_tcp:
                    payload = uniform(0, 1) < 0.7 ? uniform_int(900, 1448) : uniform_int(60, 600);
                    add(t, tcp4_frame(up, dev.ip, o.remote_ip, local_port, 443, payload));
                    break;
                default:
                    payload = uniform(0, 1) < 0.7 ? uniform_int(900, 1400) : uniform_int(100, 600);
                    add(t, udp4_frame(up, dev.ip, o.remote_ip, local_port, 8000, payload));
                    break;
                }
            }
            const int dl = static_cast<int>(std::lround(dev.dl_pps));
            for (int i = 0; i < dl; ++i) {
                double t = s + (i + uniform(0, 0.9)) / dl;
                if (dev.kind == TrafficKind::video_tcp)
                    add(t, tcp4_frame(down, o.remote_ip, dev.ip, 443, local_port, 0));
                else
                    add(t, udp4_frame(down, o.remote_ip, dev.ip, 8000, local_port, uniform_int(20, 80)));
            }
        }
    }

    if (o.background_noise) {
        for (int s = 0; s < slots; ++s) {
            add(s + 0.5, arp_frame(o.gateway_mac, ip("192.168.1.1"), ip("192.168.1.200")));
            if (s % 15 == 7) add(s + 0.25, std::vector<std::uint8_t>(10, 0xee)); // runt
        }
    }

    std::sort(pending.begin(), pending.end(),
              [](const Pending& a, const Pending& b) { return a.ns != b.ns ? a.ns < b.ns : a.seq < b.seq; });
    std::vector<pcap::RawFrame> frames;
    frames.reserve(pending.size());
    for (auto& p : pending) frames.push_back(pcap::make_frame(Timestamp::from_nanos(p.ns), std::move(p.data)));
    return frames;
}

SynthOptions camera_scenario()
{
    SynthOptions o;
    o.seed = 2024;
    o.duration_s = 60;
    o.gateway_mac = mac("02:00:00:00:00:01");
    o.remote_ip = ip("203.0.113.10");
    o.devices = {
        {mac("3c:8c:f8:00:00:01"), ip("192.168.1.21"), TrafficKind::video_udp, 12, 3, 1.0},
        {mac("5c:62:8b:00:00:02"), ip("192.168.1.22"), TrafficKind::video_tcp, 10, 4, 1.0},
        {mac("d8:1f:12:00:00:03"), ip("192.168.1.23"), TrafficKind::video_udp, 8, 2, 1.0},
        {mac("a4:83:e7:00:00:04"), ip("192.168.1.40"), TrafficKind::chatty, 0, 0, 0.35},
    };
    return o;
}

SynthOptions bulk_scenario(double mbps, double duration_s, std::uint64_t seed)
{
    SynthOptions o;
    o.seed = seed;
    o.duration_s = duration_s;
    o.gateway_mac = mac("02:00:00:00:00:01");
    o.remote_ip = ip("198.51.100.7");
    const double frame_bits = (14 + 20 + 8 + 1472) * 8.0;
    o.devices = {
        {mac("b8:27:eb:00:00:10"), ip("192.168.1.50"), TrafficKind::bulk_udp, mbps * 1e6 / frame_bits, 20, 1.0},
        {mac("3c:8c:f8:00:00:01"), ip("192.168.1.21"), TrafficKind::video_udp, 12, 3, 1.0},
        {mac("a4:83:e7:00:00:04"), ip("192.168.1.40"), TrafficKind::chatty, 0, 0, 0.5},
    };
    return o;
}

void write_trace_file(const std::filesystem::path& path, const std::vector<pcap::RawFrame>& frames)
{
    pcap::TraceHeader h;
    h.snap_len = 65535;
    auto bytes = pcap::write_trace(h, frames);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

} // namespace iotfx::fixtures
