#pragma once

// Frame crafting and deterministic synthetic traces for tests, benchmarks
// and the bundled fixture.

#include "iotfx/pcap_io.hpp"
#include "iotfx/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace iotfx::fixtures {

struct L2
{
    MacAddress src;
    MacAddress dst;
    std::optional<std::uint16_t> vlan;
};

/// Ethernet + IPv4 + TCP. The frame carries `payload_len` zero bytes after a
/// TCP header of `tcp_header_len` bytes (multiple of 4, 20..60) and
/// `ip_options_len` bytes of IPv4 options (multiple of 4, 0..40).
std::vector<std::uint8_t> tcp4_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len,
                                     std::uint32_t tcp_header_len = 20, std::uint32_t ip_options_len = 0);

std::vector<std::uint8_t> udp4_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len);

/// Ethernet + IPv6 (+ optional hop-by-hop header) + TCP/UDP.
std::vector<std::uint8_t> tcp6_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len, bool hop_by_hop = false);
std::vector<std::uint8_t> udp6_frame(const L2& l2, const IpAddress& src, const IpAddress& dst, std::uint16_t sport,
                                     std::uint16_t dport, std::uint32_t payload_len, bool hop_by_hop = false);

/// 60-byte padded ARP request.
std::vector<std::uint8_t> arp_frame(const MacAddress& src, const IpAddress& sender, const IpAddress& target);

MacAddress mac(const char* text);
IpAddress ip(const char* text);

// ---------------------------------------------------------------------------

enum class TrafficKind : std::uint8_t { video_udp, video_tcp, bulk_udp, chatty };

struct SynthDevice
{
    MacAddress mac;
    IpAddress ip;
    TrafficKind kind = TrafficKind::video_udp;
    double ul_pps = 10;   // device -> gateway
    double dl_pps = 3;    // gateway -> device
    /// Fraction of 1-second slots with traffic (chatty devices only).
    double duty = 1.0;
};

struct SynthOptions
{
    Timestamp start{1'650'000'000, 0};
    double duration_s = 60;
    std::uint64_t seed = 1;
    MacAddress gateway_mac;
    IpAddress remote_ip;
    std::vector<SynthDevice> devices;
    /// Adds gateway ARP broadcasts and an occasional undecodable runt frame.
    bool background_noise = true;
};

/// Frames sorted by timestamp; every timestamp lies in [start, start + duration).
/// Identical options always yield identical frames.
std::vector<pcap::RawFrame> synthesize(const SynthOptions& options);

/// Three continuously streaming cameras, one intermittent laptop and AP noise.
SynthOptions camera_scenario();

/// One device pushing UDP at roughly `mbps` megabits per second.
SynthOptions bulk_scenario(double mbps, double duration_s, std::uint64_t seed = 7);

/// Writes frames as a microsecond pcap file.
void write_trace_file(const std::filesystem::path& path, const std::vector<pcap::RawFrame>& frames);

} // namespace iotfx::fixtures
