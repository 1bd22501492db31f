#pragma once

// The per-window feature catalog.
//
//   pkt_len     9 categories x 8 statistics          72
//   payload_len 9 categories x 7 statistics (no count) 63
//   iat         9 categories x 5 statistics          45
//   pmf         9 categories x 16 frame-length bins  144
//   card        5 endpoint cardinalities              5
//                                                    ---
//                                                    329
//
// Statistics are population moments; kurtosis is Pearson (non-excess).
// Every degenerate input (no samples, zero variance) yields 0, so no
// computed value is ever NaN or infinite.

#include "iotfx/windowing.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iotfx::features {

enum class Group : std::uint8_t { pkt_len, payload_len, iat, pmf, card };

enum class Category : std::uint8_t { tcp_dl, tcp_ul, tcp, udp_dl, udp_ul, udp, dl, ul, all };
inline constexpr std::size_t category_count = 9;

enum class StatKind : std::uint8_t { count, sum, mean, median, mode, variance, std_dev, kurtosis };
inline constexpr std::size_t stat_kind_count = 8;

enum class Cardinality : std::uint8_t {
    n_remote_ips,
    n_local_tcp_ports,
    n_remote_tcp_ports,
    n_local_udp_ports,
    n_remote_udp_ports,
};
inline constexpr std::size_t cardinality_count = 5;

inline constexpr std::size_t pmf_bin_count = 16;
inline constexpr std::uint32_t pmf_bin_width = 100;

inline constexpr std::size_t catalog_size = 329;

std::string_view to_string(Group g);
std::string_view to_string(Category c);
std::string_view to_string(StatKind s);
std::string_view to_string(Cardinality c);

/// Statistics offered by each statistic-bearing group, in catalog order.
std::span<const StatKind> group_stats(Group g);

/// Does the record belong to the category's packet subset?
bool in_category(const PacketRecord& r, Category c);

struct FeatureName
{
    Group group = Group::pkt_len;
    Category category = Category::all; // unused for card
    std::uint8_t detail = 0;           // StatKind, pmf bin, or Cardinality

    std::string to_string() const;
    static std::optional<FeatureName> parse(std::string_view text);

    friend bool operator==(const FeatureName&, const FeatureName&) = default;
};

/// All 329 names in canonical order.
const std::vector<FeatureName>& catalog();
const std::vector<std::string>& catalog_strings();

/// Position of a name in catalog().
std::size_t catalog_index(const FeatureName& name);

class UnknownFeature : public std::invalid_argument
{
public:
    explicit UnknownFeature(std::vector<std::string> patterns);
    const std::vector<std::string>& patterns() const noexcept { return patterns_; }

private:
    std::vector<std::string> patterns_;
};

/// An ordered subset of the catalog; iteration follows catalog order.
class FeatureSelector
{
public:
    FeatureSelector() = default;
    explicit FeatureSelector(std::vector<std::uint16_t> catalog_indices);

    static FeatureSelector all();

    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    const std::vector<std::uint16_t>& indices() const { return indices_; }
    std::vector<std::string> names() const;

    friend bool operator==(const FeatureSelector&, const FeatureSelector&) = default;

private:
    std::vector<std::uint16_t> indices_;
};

/// Union of exact names and wildcard patterns ("pmf.ul.*", "pkt_len.*.mean",
/// "*"). A "*" segment matches one name segment; a trailing "*" matches the rest.
/// Throws UnknownFeature listing every pattern that matched nothing.
FeatureSelector parse_selector(std::span<const std::string> patterns);

using StatMask = std::uint8_t;
inline constexpr StatMask stat_bit(StatKind k) { return static_cast<StatMask>(1u << static_cast<unsigned>(k)); }
inline constexpr StatMask all_stats = 0xff;

/// Values for each requested statistic; entries outside the mask are 0.
using StatValues = std::array<double, stat_kind_count>;

StatValues compute_stats(std::span<const double> values, StatMask kinds = all_stats);

/// Successive timestamp gaps (seconds) between the category's packets.
std::vector<double> compute_iat_series(const CompletedWindow& window, Category category);

/// Percentage of frames per 100-byte bin; the last bin is [1500, inf).
std::array<double, pmf_bin_count> compute_pmf(std::span<const std::uint32_t> lengths);

std::array<std::uint64_t, cardinality_count> compute_cardinalities(const CompletedWindow& window);

struct FeatureVector
{
    Timestamp start_time;
    MacAddress device_mac;
    std::vector<double> values; // selector order
};

FeatureVector compute_feature_vector(const CompletedWindow& window, const FeatureSelector& selector);

} // namespace iotfx::features
