#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iotfx {

/// Canonical capture time: whole seconds since the epoch plus nanoseconds.
struct Timestamp
{
    std::int64_t sec = 0;
    std::uint32_t nsec = 0;

    static Timestamp from_nanos(std::int64_t total_ns);
    static Timestamp from_seconds(double seconds);

    std::int64_t to_nanos() const { return sec * 1'000'000'000LL + nsec; }
    double to_seconds() const { return static_cast<double>(sec) + nsec * 1e-9; }

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

/// Signed difference a - b in nanoseconds.
inline std::int64_t nanos_between(const Timestamp& a, const Timestamp& b)
{
    return (a.sec - b.sec) * 1'000'000'000LL
           + (static_cast<std::int64_t>(a.nsec) - static_cast<std::int64_t>(b.nsec));
}

/// Fixed-point decimal rendering: at most 9 fractional digits, trailing zeros trimmed.
std::string format_timestamp(const Timestamp& ts);
std::string format_nanos(std::int64_t ns);

class MacAddress
{
public:
    using bytes_type = std::array<std::uint8_t, 6>;

    constexpr MacAddress() = default;
    constexpr explicit MacAddress(const bytes_type& b) : bytes_(b) {}

    /// Accepts six colon- or dash-separated 2-hex-digit groups, any case.
    static std::optional<MacAddress> parse(std::string_view text);

    const bytes_type& bytes() const { return bytes_; }

    /// Group (broadcast/multicast) bit set.
    bool is_group() const { return (bytes_[0] & 0x01) != 0; }

    /// Lowercase aa:bb:cc:dd:ee:ff.
    std::string to_string() const;
    /// Lowercase aa-bb-cc-dd-ee-ff, safe in file names.
    std::string to_file_token() const;

    friend auto operator<=>(const MacAddress&, const MacAddress&) = default;
    friend bool operator==(const MacAddress&, const MacAddress&) = default;

private:
    bytes_type bytes_{};
};

class IpAddress
{
public:
    enum class family : std::uint8_t { v4, v6 };

    IpAddress() = default;
    static IpAddress v4(const std::uint8_t* p);
    static IpAddress v6(const std::uint8_t* p);
    static std::optional<IpAddress> parse(std::string_view text);

    family kind() const { return family_; }
    const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
    std::string to_string() const;

    friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
    friend bool operator==(const IpAddress&, const IpAddress&) = default;

private:
    family family_ = family::v4;
    std::array<std::uint8_t, 16> bytes_{};
};

} // namespace iotfx

template <>
struct std::hash<iotfx::MacAddress>
{
    std::size_t operator()(const iotfx::MacAddress& m) const noexcept
    {
        std::uint64_t v = 0;
        for (auto b : m.bytes()) v = (v << 8) | b;
        return std::hash<std::uint64_t>{}(v);
    }
};

template <>
struct std::hash<iotfx::IpAddress>
{
    std::size_t operator()(const iotfx::IpAddress& a) const noexcept
    {
        std::size_t h = static_cast<std::size_t>(a.kind());
        for (auto b : a.bytes()) h = h * 131 + b;
        return h;
    }
};
