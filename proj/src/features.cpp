#include "iotfx/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace iotfx::features {

namespace {

constexpr std::array<StatKind, 8> pkt_len_stats = {StatKind::count,  StatKind::sum,      StatKind::mean,
                                                   StatKind::median, StatKind::mode,     StatKind::variance,
                                                   StatKind::std_dev, StatKind::kurtosis};
constexpr std::array<StatKind, 7> payload_stats = {StatKind::sum,      StatKind::mean,    StatKind::median,
                                                   StatKind::mode,     StatKind::variance, StatKind::std_dev,
                                                   StatKind::kurtosis};
constexpr std::array<StatKind, 5> iat_stats = {StatKind::mean, StatKind::median, StatKind::variance,
                                               StatKind::std_dev, StatKind::kurtosis};

constexpr std::array<std::string_view, 5> group_names = {"pkt_len", "payload_len", "iat", "pmf", "card"};
constexpr std::array<std::string_view, 9> category_names = {"tcp_dl", "tcp_ul", "tcp", "udp_dl", "udp_ul",
                                                            "udp",    "dl",     "ul",  "all"};
constexpr std::array<std::string_view, 8> stat_names = {"count",    "sum",     "mean",    "median",
                                                        "mode",     "variance", "std_dev", "kurtosis"};
constexpr std::array<std::string_view, 5> card_names = {"n_remote_ips", "n_local_tcp_ports", "n_remote_tcp_ports",
                                                        "n_local_udp_ports", "n_remote_udp_ports"};

std::vector<FeatureName> build_catalog()
{
    std::vector<FeatureName> out;
    out.reserve(catalog_size);
    for (Group g : {Group::pkt_len, Group::payload_len, Group::iat})
        for (std::size_t c = 0; c < category_count; ++c)
            for (StatKind s : group_stats(g))
                out.push_back({g, static_cast<Category>(c), static_cast<std::uint8_t>(s)});
    for (std::size_t c = 0; c < category_count; ++c)
        for (std::size_t b = 0; b < pmf_bin_count; ++b)
            out.push_back({Group::pmf, static_cast<Category>(c), static_cast<std::uint8_t>(b)});
    for (std::size_t k = 0; k < cardinality_count; ++k)
        out.push_back({Group::card, Category::all, static_cast<std::uint8_t>(k)});
    return out;
}

std::vector<std::string_view> split_dots(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto dot = s.find('.', start);
        out.push_back(s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return out;
}

bool pattern_matches(const std::vector<std::string_view>& pat, const std::vector<std::string_view>& name)
{
    for (std::size_t i = 0; i < pat.size(); ++i) {
        if (i >= name.size()) return false;
        if (pat[i] == "*") {
            if (i + 1 == pat.size()) return true; // trailing star swallows the rest
            continue;
        }
        if (pat[i] != name[i]) return false;
    }
    return pat.size() == name.size();
}

template <std::size_t N>
std::optional<std::uint8_t> lookup(const std::array<std::string_view, N>& table, std::string_view key)
{
    for (std::size_t i = 0; i < N; ++i)
        if (table[i] == key) return static_cast<std::uint8_t>(i);
    return std::nullopt;
}

} // namespace

std::string_view to_string(Group g) { return group_names[static_cast<std::size_t>(g)]; }
std::string_view to_string(Category c) { return category_names[static_cast<std::size_t>(c)]; }
std::string_view to_string(StatKind s) { return stat_names[static_cast<std::size_t>(s)]; }
std::string_view to_string(Cardinality c) { return card_names[static_cast<std::size_t>(c)]; }

std::span<const StatKind> group_stats(Group g)
{
    switch (g) {
    case Group::pkt_len:
        return pkt_len_stats;
    case Group::payload_len:
        return payload_stats;
    case Group::iat:
        return iat_stats;
    default:
        return {};
    }
}

bool in_category(const PacketRecord& r, Category c)
{
    const bool dl = r.direction == Direction::dl;
    switch (c) {
    case Category::tcp_dl:
        return r.transport == Transport::tcp && dl;
    case Category::tcp_ul:
        return r.transport == Transport::tcp && !dl;
    case Category::tcp:
        return r.transport == Transport::tcp;
    case Category::udp_dl:
        return r.transport == Transport::udp && dl;
    case Category::udp_ul:
        return r.transport == Transport::udp && !dl;
    case Category::udp:
        return r.transport == Transport::udp;
    case Category::dl:
        return dl;
    case Category::ul:
        return !dl;
    case Category::all:
        return true;
    }
    return false;
}

std::string FeatureName::to_string() const
{
    std::string out(features::to_string(group));
    out += '.';
    switch (group) {
    case Group::card:
        out += card_names[detail];
        return out;
    case Group::pmf: {
        out += features::to_string(category);
        char buf[8];
        std::snprintf(buf, sizeof buf, ".bin%02u", static_cast<unsigned>(detail));
        out += buf;
        return out;
    }
    default:
        out += features::to_string(category);
        out += '.';
        out += stat_names[detail];
        return out;
    }
}

std::optional<FeatureName> FeatureName::parse(std::string_view text)
{
    auto parts = split_dots(text);
    auto g = lookup(group_names, parts[0]);
    if (!g) return std::nullopt;
    FeatureName n;
    n.group = static_cast<Group>(*g);

    if (n.group == Group::card) {
        if (parts.size() != 2) return std::nullopt;
        auto k = lookup(card_names, parts[1]);
        if (!k) return std::nullopt;
        n.detail = *k;
        return n;
    }
    if (parts.size() != 3) return std::nullopt;
    auto c = lookup(category_names, parts[1]);
    if (!c) return std::nullopt;
    n.category = static_cast<Category>(*c);

    if (n.group == Group::pmf) {
        auto d = parts[2];
        if (d.size() != 5 || d.substr(0, 3) != "bin") return std::nullopt;
        unsigned bin = 0;
        auto [p, ec] = std::from_chars(d.data() + 3, d.data() + 5, bin);
        if (ec != std::errc() || p != d.data() + 5 || bin >= pmf_bin_count) return std::nullopt;
        n.detail = static_cast<std::uint8_t>(bin);
        return n;
    }
    auto s = lookup(stat_names, parts[2]);
    if (!s) return std::nullopt;
    auto allowed = group_stats(n.group);
    if (std::find(allowed.begin(), allowed.end(), static_cast<StatKind>(*s)) == allowed.end()) return std::nullopt;
    n.detail = *s;
    return n;
}

const std::vector<FeatureName>& catalog()
{
    static const std::vector<FeatureName> names = build_catalog();
    return names;
}

const std::vector<std::string>& catalog_strings()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& n : catalog()) out.push_back(n.to_string());
        return out;
    }();
    return names;
}

std::size_t catalog_index(const FeatureName& name)
{
    const std::size_t cat = static_cast<std::size_t>(name.category);
    switch (name.group) {
    case Group::pkt_len:
        return cat * pkt_len_stats.size()
               + static_cast<std::size_t>(std::find(pkt_len_stats.begin(), pkt_len_stats.end(),
                                                    static_cast<StatKind>(name.detail))
                                          - pkt_len_stats.begin());
    case Group::payload_len:
        return 72 + cat * payload_stats.size()
               + static_cast<std::size_t>(std::find(payload_stats.begin(), payload_stats.end(),
                                                    static_cast<StatKind>(name.detail))
                                          - payload_stats.begin());
    case Group::iat:
        return 135 + cat * iat_stats.size()
               + static_cast<std::size_t>(
                   std::find(iat_stats.begin(), iat_stats.end(), static_cast<StatKind>(name.detail))
                   - iat_stats.begin());
    case Group::pmf:
        return 180 + cat * pmf_bin_count + name.detail;
    case Group::card:
        return 324 + name.detail;
    }
    return catalog_size;
}

UnknownFeature::UnknownFeature(std::vector<std::string> patterns)
    : std::invalid_argument([&] {
          std::string msg = "unknown feature pattern(s):";
          for (const auto& p : patterns) msg += " '" + p + "'";
          return msg;
      }()),
      patterns_(std::move(patterns))
{
}

FeatureSelector::FeatureSelector(std::vector<std::uint16_t> catalog_indices) : indices_(std::move(catalog_indices))
{
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    if (!indices_.empty() && indices_.back() >= catalog_size)
        throw std::out_of_range("feature selector index outside the catalog");
}

FeatureSelector FeatureSelector::all()
{
    std::vector<std::uint16_t> idx(catalog_size);
    std::iota(idx.begin(), idx.end(), std::uint16_t{0});
    return FeatureSelector(std::move(idx));
}

std::vector<std::string> FeatureSelector::names() const
{
    std::vector<std::string> out;
    out.reserve(indices_.size());
    for (auto i : indices_) out.push_back(catalog_strings()[i]);
    return out;
}

FeatureSelector parse_selector(std::span<const std::string> patterns)
{
    std::vector<bool> chosen(catalog_size, false);
    std::vector<std::string> unknown;

    std::vector<std::vector<std::string_view>> split_names;
    split_names.reserve(catalog_size);
    for (const auto& s : catalog_strings()) split_names.push_back(split_dots(s));

    for (const auto& pattern : patterns) {
        bool any = false;
        if (pattern.find('*') == std::string::npos) {
            if (auto n = FeatureName::parse(pattern)) {
                chosen[catalog_index(*n)] = true;
                any = true;
            }
        } else {
            auto pat = split_dots(pattern);
            for (std::size_t i = 0; i < catalog_size; ++i) {
                if (pattern_matches(pat, split_names[i])) {
                    chosen[i] = true;
                    any = true;
                }
            }
        }
        if (!any) unknown.push_back(pattern);
    }
    if (!unknown.empty()) throw UnknownFeature(std::move(unknown));

    std::vector<std::uint16_t> idx;
    for (std::size_t i = 0; i < catalog_size; ++i)
        if (chosen[i]) idx.push_back(static_cast<std::uint16_t>(i));
    return FeatureSelector(std::move(idx));
}

StatValues compute_stats(std::span<const double> values, StatMask kinds)
{
    StatValues out{};
    const std::size_t n = values.size();
    if (n == 0 || kinds == 0) return out;

    auto want = [&](StatKind k) { return (kinds & stat_bit(k)) != 0; };
    auto set = [&](StatKind k, double v) { out[static_cast<std::size_t>(k)] = v; };

    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    const double mean = sum / static_cast<double>(n);
    set(StatKind::count, static_cast<double>(n));
    set(StatKind::sum, sum);

    const bool need_order = want(StatKind::median) || want(StatKind::mode);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const bool constant = *lo == *hi;

    set(StatKind::mean, constant ? *lo : mean);

    if (need_order) {
        std::vector<double> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        const std::size_t mid = n / 2;
        set(StatKind::median, n % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0);

        double best = sorted[0];
        std::size_t best_run = 0;
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j < n && sorted[j] == sorted[i]) ++j;
            if (j - i > best_run) { // strict: ties keep the smaller value
                best_run = j - i;
                best = sorted[i];
            }
            i = j;
        }
        set(StatKind::mode, best);
    }

    const bool need_moments = want(StatKind::variance) || want(StatKind::std_dev) || want(StatKind::kurtosis);
    if (need_moments && !constant) {
        double m2 = 0, m4 = 0;
        for (double x : values) {
            const double d = x - mean;
            const double d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= static_cast<double>(n);
        m4 /= static_cast<double>(n);
        set(StatKind::variance, m2);
        set(StatKind::std_dev, std::sqrt(m2));
        set(StatKind::kurtosis, m2 > 0 ? m4 / (m2 * m2) : 0.0);
    }

    for (std::size_t k = 0; k < stat_kind_count; ++k)
        if (!(kinds & (1u << k))) out[k] = 0;
    return out;
}

std::vector<double> compute_iat_series(const CompletedWindow& window, Category category)
{
    std::vector<double> out;
    const PacketRecord* prev = nullptr;
    for (const auto& r : window.packets) {
        if (!in_category(r, category)) continue;
        if (prev) out.push_back(static_cast<double>(nanos_between(r.timestamp, prev->timestamp)) * 1e-9);
        prev = &r;
    }
    return out;
}

std::array<double, pmf_bin_count> compute_pmf(std::span<const std::uint32_t> lengths)
{
    std::array<double, pmf_bin_count> out{};
    if (lengths.empty()) return out;
    std::array<std::uint64_t, pmf_bin_count> counts{};
    for (auto len : lengths) ++counts[std::min<std::size_t>(len / pmf_bin_width, pmf_bin_count - 1)];
    const double n = static_cast<double>(lengths.size());
    for (std::size_t b = 0; b < pmf_bin_count; ++b) out[b] = 100.0 * static_cast<double>(counts[b]) / n;
    return out;
}

std::array<std::uint64_t, cardinality_count> compute_cardinalities(const CompletedWindow& window)
{
    std::unordered_set<IpAddress> remote_ips;
    std::unordered_set<std::uint16_t> local_tcp, remote_tcp, local_udp, remote_udp;
    for (const auto& r : window.packets) {
        if (r.remote_ip) remote_ips.insert(*r.remote_ip);
        if (r.transport == Transport::tcp) {
            if (r.local_port) local_tcp.insert(*r.local_port);
            if (r.remote_port) remote_tcp.insert(*r.remote_port);
        } else if (r.transport == Transport::udp) {
            if (r.local_port) local_udp.insert(*r.local_port);
            if (r.remote_port) remote_udp.insert(*r.remote_port);
        }
    }
    return {remote_ips.size(), local_tcp.size(), remote_tcp.size(), local_udp.size(), remote_udp.size()};
}

FeatureVector compute_feature_vector(const CompletedWindow& window, const FeatureSelector& selector)
{
    FeatureVector fv;
    fv.start_time = window.start_time;
    fv.device_mac = window.key.device_mac;
    fv.values.resize(selector.size());

    const auto& names = catalog();

    // Which statistics each (group, category) needs.
    std::array<std::array<StatMask, category_count>, 3> masks{};
    std::array<bool, category_count> need_pmf{};
    bool need_card = false;
    for (auto i : selector.indices()) {
        const auto& n = names[i];
        const auto c = static_cast<std::size_t>(n.category);
        switch (n.group) {
        case Group::pkt_len:
        case Group::payload_len:
        case Group::iat:
            masks[static_cast<std::size_t>(n.group)][c] |= static_cast<StatMask>(1u << n.detail);
            break;
        case Group::pmf:
            need_pmf[c] = true;
            break;
        case Group::card:
            need_card = true;
            break;
        }
    }

    std::array<std::array<StatValues, category_count>, 3> stats{};
    std::array<std::array<double, pmf_bin_count>, category_count> pmfs{};
    std::vector<double> sample;
    std::vector<std::uint32_t> lengths;

    for (std::size_t c = 0; c < category_count; ++c) {
        const auto cat = static_cast<Category>(c);
        if (masks[0][c] || need_pmf[c]) {
            lengths.clear();
            for (const auto& r : window.packets)
                if (in_category(r, cat)) lengths.push_back(r.frame_len);
            if (masks[0][c]) {
                sample.assign(lengths.begin(), lengths.end());
                stats[0][c] = compute_stats(sample, masks[0][c]);
            }
            if (need_pmf[c]) pmfs[c] = compute_pmf(lengths);
        }
        if (masks[1][c]) {
            sample.clear();
            for (const auto& r : window.packets)
                if (r.payload_len && r.transport != Transport::other && in_category(r, cat))
                    sample.push_back(static_cast<double>(*r.payload_len));
            stats[1][c] = compute_stats(sample, masks[1][c]);
        }
        if (masks[2][c]) {
            sample = compute_iat_series(window, cat);
            stats[2][c] = compute_stats(sample, masks[2][c]);
        }
    }

    std::array<std::uint64_t, cardinality_count> card{};
    if (need_card) card = compute_cardinalities(window);

    for (std::size_t k = 0; k < selector.size(); ++k) {
        const auto& n = names[selector.indices()[k]];
        const auto c = static_cast<std::size_t>(n.category);
        double v = 0;
        switch (n.group) {
        case Group::pkt_len:
        case Group::payload_len:
        case Group::iat:
            v = stats[static_cast<std::size_t>(n.group)][c][n.detail];
            break;
        case Group::pmf:
            v = pmfs[c][n.detail];
            break;
        case Group::card:
            v = static_cast<double>(card[n.detail]);
            break;
        }
        fv.values[k] = std::isfinite(v) ? v : 0.0;
    }
    return fv;
}

} // namespace iotfx::features
