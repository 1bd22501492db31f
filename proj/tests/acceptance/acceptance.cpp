// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "iotfx/engine.hpp"
#include "iotfx/features.hpp"
#include "iotfx/filter.hpp"
#include "iotfx/fixtures.hpp"
#include "filter_vectors.hpp"
#include "oracle.hpp"
#include "service_fixture.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace iotfx;
namespace fx = iotfx::fixtures;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome catalog_integrity()
{
    const auto& names = features::catalog_strings();
    std::map<std::string, int> groups;
    for (const auto& n : names) ++groups[n.substr(0, n.find('.'))];
    const bool ok = names.size() == 329 && groups["pkt_len"] == 72 && groups["payload_len"] == 63 &&
                    groups["iat"] == 45 && groups["pmf"] == 144 && groups["card"] == 5 && groups.size() == 5 &&
                    names == testing::oracle_catalog();
    return {ok, fmt("%zu names, groups %d/%d/%d/%d/%d", names.size(), groups["pkt_len"], groups["payload_len"],
                    groups["iat"], groups["pmf"], groups["card"])};
}

Outcome oracle_equivalence()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240611);
    const auto selector = features::FeatureSelector::all();
    const auto& names = features::catalog_strings();
    std::size_t mismatches = 0, windows = 0, packets = 0;
    std::string first;
    for (; windows < 1000; ++windows) {
        auto w = testing::random_window(rng, 500);
        packets += w.packets.size();
        auto v = features::compute_feature_vector(w, selector);
        for (std::size_t i = 0; i < names.size(); ++i) {
            const double expect = testing::oracle_feature(w, names[i]);
            if (!testing::close_enough(v.values[i], expect)) {
                if (!mismatches++) first = fmt(" first: %s got %.17g want %.17g", names[i].c_str(), v.values[i], expect);
            }
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 60,
            fmt("%zu windows, %zu packets, %zu mismatches, %.1f s", windows, packets, mismatches, secs) + first};
}

MacAddress mac_at(const std::vector<std::uint8_t>& d, std::size_t off)
{
    MacAddress::bytes_type b{};
    std::copy_n(d.begin() + static_cast<long>(off), 6, b.begin());
    return MacAddress(b);
}

Outcome determinism()
{
    testing::TempDir dir;
    const auto cfg = testing::load_bundled_camera_config();
    const auto trace = testing::bundled_fixture_trace();
    auto a = engine::run_offline(cfg, trace, dir / "a");
    auto b = engine::run_offline(cfg, trace, dir / "b");

    bool identical = a.files.size() == b.files.size() && !a.files.empty();
    std::size_t rows = 0;
    for (const auto& f : a.files) {
        const auto text = testing::read_file(f.path);
        identical = identical && text == testing::read_file(dir / "b" / f.path.filename());
        rows += testing::split_lines(text).size() - (cfg.output.include_header ? 1 : 0);
    }

    // Expected rows straight from the Ethernet headers: one per (device, window) with traffic.
    std::set<MacAddress> devices;
    for (const auto& d : cfg.devices) devices.insert(d.mac);
    const auto window_ns = static_cast<std::int64_t>(cfg.window_seconds * 1e9);
    std::optional<std::int64_t> origin;
    std::set<std::pair<MacAddress, std::int64_t>> cells;
    std::ifstream in(trace, std::ios::binary);
    pcap::TraceReader reader(in);
    while (auto next = reader.next_frame()) {
        const auto& f = *next;
        if (f.data.size() < 14) continue;
        for (auto m : {mac_at(f.data, 0), mac_at(f.data, 6)}) {
            if (!devices.count(m)) continue;
            if (!origin) origin = f.timestamp.to_nanos();
            cells.insert({m, (f.timestamp.to_nanos() - *origin) / window_ns});
        }
    }

    const auto& s = a.status;
    const bool conserved = s.packets_seen == s.packets_matched + s.packets_filtered + s.packets_undecodable &&
                           s.records_windowed + s.late_drops == s.records_projected &&
                           s.windows_emitted == s.windows_queued && s.windows_emitted == rows;
    const bool ok = identical && rows == cells.size() && conserved && a.status.state == engine::RunState::finished;
    return {ok, fmt("identical=%d rows=%zu expected=%zu conservation=%d", identical, rows, cells.size(), conserved)};
}

Outcome camera_config()
{
    testing::TempDir dir;
    const auto cfg = testing::load_bundled_camera_config();
    auto r = engine::run_offline(cfg, testing::bundled_fixture_trace(), dir / "run");
    const auto& names = features::catalog_strings();
    const std::set<std::string> known(names.begin(), names.end());
    bool ok = cfg.selector.size() == 58 && r.files.size() == 3;
    std::string detail = fmt("%zu features selected;", cfg.selector.size());
    for (const auto& f : r.files) {
        auto lines = testing::split_lines(testing::read_file(f.path));
        auto header = testing::split_csv(lines.at(0));
        std::size_t feature_cols = 0;
        for (const auto& h : header) feature_cols += known.count(h);
        bool widths = true;
        for (std::size_t i = 1; i < lines.size(); ++i) widths = widths && testing::split_csv(lines[i]).size() == header.size();
        ok = ok && feature_cols == 58 && widths && lines.size() - 1 == 30;
        detail += fmt(" %s: %zu cols, %zu windows;", f.path.filename().c_str(), feature_cols, lines.size() - 1);
    }
    return {ok, detail};
}

Outcome storage_reduction()
{
    testing::TempDir dir;
    fx::write_trace_file(dir / "t.pcap", fx::synthesize(fx::bulk_scenario(5, 60)));
    const auto cfg = config::parse_config(R"({"name":"bulk","window_seconds":5,"features":["*"]})");
    auto r = engine::run_offline(cfg, dir / "t.pcap", dir / "run");
    std::uintmax_t csv = 0;
    for (const auto& f : r.files) csv += fs::file_size(f.path);
    const auto trace = fs::file_size(dir / "t.pcap");
    const double ratio = static_cast<double>(csv) / static_cast<double>(trace);
    return {ratio <= 0.01 && csv > 0,
            fmt("trace %ju bytes, csv %ju bytes, ratio %.4f%%", trace, csv, ratio * 100)};
}

Outcome throughput()
{
    testing::TempDir dir;
    const auto frames = fx::synthesize(fx::bulk_scenario(30, 60));
    fx::write_trace_file(dir / "t.pcap", frames);
    const auto cfg = config::parse_config(R"({"name":"bulk","window_seconds":5,"features":["*"]})");
    const auto t0 = Clock::now();
    auto r = engine::run_offline(cfg, dir / "t.pcap", dir / "run");
    const double secs = seconds_since(t0);
    const double mb = static_cast<double>(fs::file_size(dir / "t.pcap")) / 1e6;
    return {secs < 60 && r.status.state == engine::RunState::finished && r.status.packets_seen == frames.size(),
            fmt("%zu frames (%.0f MB) in %.2f s", frames.size(), mb, secs)};
}

Outcome graceful_stop()
{
    testing::TempDir dir;
    const auto frames = fx::synthesize(fx::camera_scenario());
    fx::write_trace_file(dir / "t.pcap", frames);
    const auto cfg = config::parse_config(R"({"name":"all","window_seconds":2,"features":["*"]})");
    engine::run_offline(cfg, dir / "t.pcap", dir / "full");
    const auto full = testing::csv_rows(dir / "full");

    std::mt19937_64 rng(77);
    int good = 0;
    std::string bad;
    for (int i = 0; i < 20; ++i) {
        const std::uint64_t p = 1 + rng() % (frames.size() - 1);
        const auto tag = std::to_string(i);
        engine::RunOptions opts;
        opts.stop_after_frames = p;
        auto s = engine::run_offline(cfg, dir / "t.pcap", dir / ("stop" + tag), opts);
        fx::write_trace_file(dir / ("p" + tag + ".pcap"),
                             std::vector<pcap::RawFrame>(frames.begin(), frames.begin() + static_cast<long>(p)));
        engine::run_offline(cfg, dir / ("p" + tag + ".pcap"), dir / ("prefix" + tag));
        const auto stopped = testing::csv_rows(dir / ("stop" + tag));

        bool ok = s.status.packets_seen == p && stopped == testing::csv_rows(dir / ("prefix" + tag)) &&
                  s.status.windows_emitted == s.status.windows_queued;
        if (ok && !stopped.empty()) {
            // every window that closed before the stop is present and unchanged
            const double last = std::stod(testing::split_csv(stopped.back())[0]);
            std::size_t closed = 0;
            for (const auto& row : full)
                if (std::stod(testing::split_csv(row)[0]) < last) ++closed;
            ok = closed <= stopped.size() && std::equal(full.begin(), full.begin() + static_cast<long>(closed),
                                                        stopped.begin());
            for (std::size_t k = closed; ok && k < stopped.size(); ++k)
                ok = std::stod(testing::split_csv(stopped[k])[0]) == last;
        }
        if (ok) ++good;
        else if (bad.empty()) bad = " first failure at frame " + std::to_string(p);
    }
    return {good == 20, fmt("%d/20 stop points match", good) + bad};
}

Outcome filter_conformance()
{
    const auto probes = testing::filter_probe_packets();
    std::size_t passed = 0;
    const auto& vectors = testing::filter_vectors();
    for (const auto& v : vectors) {
        bool ok = true;
        try {
            auto e = filter::parse_filter(v.text);
            ok = !v.error;
            for (std::size_t i = 0; ok && i < probes.size(); ++i)
                ok = filter::eval_filter(e, probes[i]) == (v.verdicts[i] == '1');
            if (ok && v.rendered) ok = filter::render_filter(e) == *v.rendered;
        } catch (const filter::FilterError& e) {
            ok = v.error && e.error_kind() == *v.error && e.offset() == v.offset;
        }
        passed += ok;
    }

    std::mt19937_64 rng(4242);
    int round_trips = 0;
    for (int i = 0; i < 10000; ++i) {
        filter::FilterExpr e(testing::random_filter_tree(rng, 4));
        try {
            const auto text = filter::render_filter(e);
            auto back = filter::parse_filter(text);
            bool ok = back == e && filter::render_filter(back) == text;
            for (int k = 0; ok && k < 4; ++k) {
                auto pkt = testing::random_probe_packet(rng);
                ok = filter::eval_filter(back, pkt) == filter::eval_filter(e, pkt);
            }
            round_trips += ok;
        } catch (const filter::FilterError&) {
        }
    }
    return {vectors.size() >= 50 && passed == vectors.size() && round_trips == 10000,
            fmt("%zu/%zu vectors, %d/10000 round trips", passed, vectors.size(), round_trips)};
}

Outcome api_state_machine()
{
    testing::ServiceFixture svc;
    auto& c = svc.http();
    const auto trace = testing::bundled_fixture_trace();
    const auto cfg = testing::read_file(testing::source_dir() / "data" / "camera_config.json");
    const std::string name = json::parse(cfg)["name"];
    const std::string base = "/api/configs/" + name;
    std::vector<std::string> steps;
    bool ok = true;
    auto expect = [&](const char* step, const httplib::Result& r, int status) {
        const int got = r ? r->status : -1;
        steps.push_back(fmt("%s=%d", step, got));
        ok = ok && got == status;
        return got == status;
    };
    auto complete_rows_only = [&](const httplib::Result& r) {
        auto files = testing::read_tar_gz(r->body);
        bool good = !files.empty();
        for (const auto& [_, text] : files) {
            std::string tail;
            auto lines = testing::split_lines(text, &tail);
            good = good && tail.empty() && !lines.empty();
            const auto width = lines.empty() ? 0 : testing::split_csv(lines[0]).size();
            for (const auto& l : lines) good = good && testing::split_csv(l).size() == width;
        }
        return good;
    };

    expect("create", c.Post("/api/configs", cfg, "application/json"), 201);
    const auto source = json{{"source", {{"type", "pcap"}, {"path", trace.string()}, {"speed", 10}}}}.dump();
    expect("start", c.Post(base + "/start", source, "application/json"), 202);

    std::uint64_t windows = 0;
    std::string state;
    for (int i = 0; ok && i < 3000 && windows < 6; ++i) {
        auto r = c.Get(base + "/status");
        if (!r || r->status != 200) break;
        auto j = json::parse(r->body);
        windows = j["windows_emitted"].get<std::uint64_t>();
        state = j["state"];
        if (state != "running") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    steps.push_back(fmt("poll=%s/%ju", state.c_str(), windows));
    ok = ok && state == "running" && windows >= 6;

    auto mid = c.Get(base + "/output");
    if (expect("download_mid", mid, 200) && !complete_rows_only(mid)) {
        ok = false;
        steps.push_back("mid_archive_torn");
    }
    auto stop = c.Post(base + "/stop", "", "application/json");
    if (expect("stop", stop, 200)) ok = ok && json::parse(stop->body)["state"] == "finished";
    auto fin = c.Get(base + "/output");
    if (expect("download_final", fin, 200)) ok = ok && complete_rows_only(fin) && fin->body.size() >= mid->body.size();
    expect("delete", c.Delete(base), 200);
    expect("gone", c.Get(base), 404);

    std::string detail;
    for (const auto& s : steps) detail += s + " ";
    return {ok, detail};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"catalog integrity", catalog_integrity},
        {"oracle equivalence", oracle_equivalence},
        {"end-to-end determinism", determinism},
        {"camera config fixture", camera_config},
        {"storage reduction", storage_reduction},
        {"throughput", throughput},
        {"graceful stop", graceful_stop},
        {"filter conformance", filter_conformance},
        {"API state machine", api_state_machine},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
