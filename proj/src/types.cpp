#include "iotfx/types.hpp"

#include <arpa/inet.h>

#include <cmath>
#include <cstdio>

namespace iotfx {

Timestamp Timestamp::from_nanos(std::int64_t total_ns)
{
    std::int64_t sec = total_ns / 1'000'000'000LL;
    std::int64_t rem = total_ns % 1'000'000'000LL;
    if (rem < 0) {
        rem += 1'000'000'000LL;
        --sec;
    }
    return {sec, static_cast<std::uint32_t>(rem)};
}

Timestamp Timestamp::from_seconds(double seconds)
{
    return from_nanos(static_cast<std::int64_t>(std::llround(seconds * 1e9)));
}

std::string format_nanos(std::int64_t ns)
{
    const bool negative = ns < 0;
    // Magnitude as unsigned so INT64_MIN does not overflow.
    std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(ns) : static_cast<std::uint64_t>(ns);
    std::uint64_t whole = mag / 1'000'000'000ULL;
    std::uint64_t frac = mag % 1'000'000'000ULL;

    char buf[48];
    int n;
    if (frac == 0) {
        n = std::snprintf(buf, sizeof buf, "%s%llu", negative ? "-" : "",
                          static_cast<unsigned long long>(whole));
    } else {
        n = std::snprintf(buf, sizeof buf, "%s%llu.%09llu", negative ? "-" : "",
                          static_cast<unsigned long long>(whole),
                          static_cast<unsigned long long>(frac));
        while (n > 0 && buf[n - 1] == '0') --n;
    }
    return std::string(buf, static_cast<std::size_t>(n));
}

std::string format_timestamp(const Timestamp& ts)
{
    return format_nanos(ts.to_nanos());
}

namespace {

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

std::optional<MacAddress> MacAddress::parse(std::string_view text)
{
    if (text.size() != 17) return std::nullopt;
    const char sep = text[2];
    if (sep != ':' && sep != '-') return std::nullopt;
    bytes_type out{};
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t at = i * 3;
        if (i > 0 && text[at - 1] != sep) return std::nullopt;
        int hi = hex_value(text[at]);
        int lo = hex_value(text[at + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return MacAddress(out);
}

std::string MacAddress::to_string() const
{
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", bytes_[0], bytes_[1],
                  bytes_[2], bytes_[3], bytes_[4], bytes_[5]);
    return buf;
}

std::string MacAddress::to_file_token() const
{
    std::string s = to_string();
    for (auto& c : s)
        if (c == ':') c = '-';
    return s;
}

IpAddress IpAddress::v4(const std::uint8_t* p)
{
    IpAddress a;
    a.family_ = family::v4;
    for (int i = 0; i < 4; ++i) a.bytes_[i] = p[i];
    return a;
}

IpAddress IpAddress::v6(const std::uint8_t* p)
{
    IpAddress a;
    a.family_ = family::v6;
    for (int i = 0; i < 16; ++i) a.bytes_[i] = p[i];
    return a;
}

std::optional<IpAddress> IpAddress::parse(std::string_view text)
{
    std::string s(text);
    std::uint8_t buf[16];
    if (s.find(':') == std::string::npos) {
        // inet_pton accepts only strict dotted-quad for AF_INET.
        if (inet_pton(AF_INET, s.c_str(), buf) == 1) return v4(buf);
        return std::nullopt;
    }
    if (inet_pton(AF_INET6, s.c_str(), buf) == 1) return v6(buf);
    return std::nullopt;
}

std::string IpAddress::to_string() const
{
    char buf[INET6_ADDRSTRLEN];
    if (family_ == family::v4)
        inet_ntop(AF_INET, bytes_.data(), buf, sizeof buf);
    else
        inet_ntop(AF_INET6, bytes_.data(), buf, sizeof buf);
    return buf;
}

} // namespace iotfx
