#pragma once

#include "iotfx/pcap_io.hpp"
#include "iotfx/types.hpp"

#include <cstdint>
#include <optional>
#include <variant>

namespace iotfx {

enum class Transport : std::uint8_t { tcp, udp, other };
enum class Direction : std::uint8_t { ul, dl };

/// Transport-level facts extracted from one frame.
struct DecodedPacket
{
    Timestamp timestamp;
    std::optional<MacAddress> src_mac;
    std::optional<MacAddress> dst_mac;
    std::uint32_t frame_len = 0; // on-wire length, link header included
    Transport transport = Transport::other;
    std::optional<IpAddress> src_ip;
    std::optional<IpAddress> dst_ip;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    std::optional<std::uint32_t> payload_len;
};

/// One packet as seen by a monitored device.
struct PacketRecord
{
    Timestamp timestamp;
    MacAddress device_mac;
    Direction direction = Direction::ul;
    Transport transport = Transport::other;
    std::uint32_t frame_len = 0;
    std::optional<std::uint32_t> payload_len;
    std::optional<IpAddress> remote_ip;
    std::optional<std::uint16_t> local_port;
    std::optional<std::uint16_t> remote_port;
};

/// The frame is shorter than the headers it declares.
struct Undecodable
{
    const char* reason = "";
};

using DecodeResult = std::variant<DecodedPacket, Undecodable>;

/// Decodes Ethernet (with 802.1Q tags) or raw-IP frames down to TCP/UDP.
/// Never reads outside frame.data.
DecodeResult decode_frame(const pcap::RawFrame& frame, std::uint32_t link_type);

/// UL when the device sent the packet, DL when it received it, else nullopt.
std::optional<PacketRecord> project_for_device(const DecodedPacket& packet, const MacAddress& device);

} // namespace iotfx
