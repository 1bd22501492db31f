#include "iotfx/packet_decode.hpp"

#include <span>

namespace iotfx {

namespace {

constexpr std::uint16_t ethertype_ipv4 = 0x0800;
constexpr std::uint16_t ethertype_ipv6 = 0x86dd;
constexpr std::uint16_t ethertype_vlan = 0x8100;
constexpr std::uint16_t ethertype_qinq = 0x88a8;

constexpr std::uint8_t proto_hopopt = 0;
constexpr std::uint8_t proto_tcp = 6;
constexpr std::uint8_t proto_udp = 17;
constexpr std::uint8_t proto_routing = 43;
constexpr std::uint8_t proto_fragment = 44;
constexpr std::uint8_t proto_dstopts = 60;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

struct Cursor
{
    std::span<const std::uint8_t> bytes;
    DecodedPacket pkt;
};

// Fills transport fields from a TCP/UDP header that starts at `at`.
// `l4_len` is the transport segment length implied by the IP header.
std::optional<Undecodable> decode_l4(Cursor& c, std::uint8_t proto, std::size_t at, std::uint32_t l4_len)
{
    auto b = c.bytes;
    if (proto == proto_tcp) {
        if (b.size() < at + 20) return Undecodable{"tcp header truncated"};
        const std::uint32_t data_off = static_cast<std::uint32_t>(b[at + 12] >> 4) * 4;
        if (data_off < 20 || data_off > l4_len) return Undecodable{"tcp data offset inconsistent"};
        c.pkt.transport = Transport::tcp;
        c.pkt.src_port = be16(b, at);
        c.pkt.dst_port = be16(b, at + 2);
        c.pkt.payload_len = l4_len - data_off;
        return std::nullopt;
    }
    if (proto == proto_udp) {
        if (b.size() < at + 8) return Undecodable{"udp header truncated"};
        const std::uint16_t udp_len = be16(b, at + 4);
        if (udp_len < 8) return Undecodable{"udp length below header size"};
        c.pkt.transport = Transport::udp;
        c.pkt.src_port = be16(b, at);
        c.pkt.dst_port = be16(b, at + 2);
        c.pkt.payload_len = static_cast<std::uint32_t>(udp_len - 8);
        return std::nullopt;
    }
    return std::nullopt;
}

std::optional<Undecodable> decode_ipv4(Cursor& c, std::size_t at)
{
    auto b = c.bytes;
    if (b.size() < at + 20) return Undecodable{"ipv4 header truncated"};
    if ((b[at] >> 4) != 4) return Undecodable{"ipv4 version mismatch"};
    const std::size_t ihl = static_cast<std::size_t>(b[at] & 0x0f) * 4;
    if (ihl < 20) return Undecodable{"ipv4 ihl below minimum"};
    if (b.size() < at + ihl) return Undecodable{"ipv4 options truncated"};
    const std::uint16_t total_len = be16(b, at + 2);
    if (total_len < ihl) return Undecodable{"ipv4 total length below header"};

    c.pkt.src_ip = IpAddress::v4(b.data() + at + 12);
    c.pkt.dst_ip = IpAddress::v4(b.data() + at + 16);

    const std::uint16_t frag = be16(b, at + 6);
    if ((frag & 0x1fff) != 0) return std::nullopt; // non-first fragment: no transport header

    const std::uint8_t proto = b[at + 9];
    return decode_l4(c, proto, at + ihl, total_len - static_cast<std::uint32_t>(ihl));
}

std::optional<Undecodable> decode_ipv6(Cursor& c, std::size_t at)
{
    auto b = c.bytes;
    if (b.size() < at + 40) return Undecodable{"ipv6 header truncated"};
    if ((b[at] >> 4) != 6) return Undecodable{"ipv6 version mismatch"};
    c.pkt.src_ip = IpAddress::v6(b.data() + at + 8);
    c.pkt.dst_ip = IpAddress::v6(b.data() + at + 24);

    std::uint32_t remaining = be16(b, at + 4); // payload length after the fixed header
    std::uint8_t next = b[at + 6];
    std::size_t pos = at + 40;

    for (;;) {
        if (next == proto_hopopt || next == proto_routing || next == proto_dstopts) {
            if (b.size() < pos + 2) return Undecodable{"ipv6 extension header truncated"};
            const std::uint32_t len = (static_cast<std::uint32_t>(b[pos + 1]) + 1) * 8;
            if (len > remaining) return Undecodable{"ipv6 extension header exceeds payload"};
            next = b[pos];
            pos += len;
            remaining -= len;
            continue;
        }
        if (next == proto_fragment) {
            if (b.size() < pos + 8) return Undecodable{"ipv6 fragment header truncated"};
            if (remaining < 8) return Undecodable{"ipv6 fragment header exceeds payload"};
            const std::uint16_t off = static_cast<std::uint16_t>(be16(b, pos + 2) >> 3);
            if (off != 0) return std::nullopt;
            next = b[pos];
            pos += 8;
            remaining -= 8;
            continue;
        }
        break;
    }
    return decode_l4(c, next, pos, remaining);
}

} // namespace

DecodeResult decode_frame(const pcap::RawFrame& frame, std::uint32_t link_type)
{
    Cursor c{std::span<const std::uint8_t>(frame.data.data(), frame.data.size()), {}};
    c.pkt.timestamp = frame.timestamp;
    c.pkt.frame_len = frame.original_len;
    auto b = c.bytes;

    std::optional<Undecodable> err;
    if (link_type == pcap::linktype_ethernet) {
        if (b.size() < 14) return Undecodable{"ethernet header truncated"};
        MacAddress::bytes_type dst{}, src{};
        for (int i = 0; i < 6; ++i) {
            dst[i] = b[i];
            src[i] = b[6 + i];
        }
        c.pkt.dst_mac = MacAddress(dst);
        c.pkt.src_mac = MacAddress(src);

        std::size_t at = 12;
        std::uint16_t ethertype = be16(b, at);
        while (ethertype == ethertype_vlan || ethertype == ethertype_qinq) {
            if (b.size() < at + 6) return Undecodable{"vlan tag truncated"};
            at += 4;
            ethertype = be16(b, at);
        }
        at += 2;
        if (ethertype == ethertype_ipv4)
            err = decode_ipv4(c, at);
        else if (ethertype == ethertype_ipv6)
            err = decode_ipv6(c, at);
    } else if (link_type == pcap::linktype_raw) {
        if (b.empty()) return Undecodable{"empty raw-ip frame"};
        const int version = b[0] >> 4;
        if (version == 4)
            err = decode_ipv4(c, 0);
        else if (version == 6)
            err = decode_ipv6(c, 0);
    } else {
        return Undecodable{"unsupported link type"};
    }

    if (err) return *err;
    // Length fields are untrusted; a payload longer than the frame is corrupt.
    if (c.pkt.payload_len && *c.pkt.payload_len > c.pkt.frame_len)
        return Undecodable{"payload length exceeds frame length"};
    return c.pkt;
}

std::optional<PacketRecord> project_for_device(const DecodedPacket& packet, const MacAddress& device)
{
    if (!packet.src_mac || !packet.dst_mac) return std::nullopt;

    PacketRecord r;
    r.timestamp = packet.timestamp;
    r.device_mac = device;
    r.transport = packet.transport;
    r.frame_len = packet.frame_len;
    r.payload_len = packet.payload_len;

    if (*packet.src_mac == device) {
        r.direction = Direction::ul;
        r.remote_ip = packet.dst_ip;
        r.local_port = packet.src_port;
        r.remote_port = packet.dst_port;
        return r;
    }
    if (*packet.dst_mac == device) {
        r.direction = Direction::dl;
        r.remote_ip = packet.src_ip;
        r.local_port = packet.dst_port;
        r.remote_port = packet.src_port;
        return r;
    }
    return std::nullopt;
}

} // namespace iotfx
