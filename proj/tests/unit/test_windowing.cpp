#include "iotfx/windowing.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace iotfx;

namespace {

const MacAddress d1({0x02, 0, 0, 0, 0, 1});
const MacAddress d2({0x02, 0, 0, 0, 0, 2});

PacketRecord rec(const MacAddress& m, double t, std::uint32_t len = 100)
{
    PacketRecord r;
    r.device_mac = m;
    r.timestamp = Timestamp::from_seconds(t);
    r.frame_len = len;
    return r;
}

} // namespace

TEST_CASE("window index uses exact arithmetic on boundaries")
{
    const Timestamp zero{};
    CHECK(window_index(Timestamp::from_seconds(12.3), zero, 5.0) == 2);
    CHECK(window_index(Timestamp{10, 0}, zero, 5.0) == 2);
    CHECK(window_index(Timestamp{9, 999'999'999}, zero, 5.0) == 1);
    CHECK(window_index(Timestamp{1000, 500'000'000}, Timestamp{1000, 500'000'000}, 2.0) == 0);
    // 0.1 s windows: 0.3 s lands in window 3, not 2 as floating point would say
    CHECK(window_index(Timestamp{0, 300'000'000}, zero, 0.1) == 3);
    CHECK_THROWS_AS(window_index(Timestamp{0, 0}, Timestamp{1, 0}, 5.0), WindowError);
    CHECK_THROWS_AS(window_length_nanos(0), WindowError);
    CHECK_THROWS_AS(window_length_nanos(-1), WindowError);
    CHECK_THROWS_AS(window_length_nanos(1e-12), WindowError);
    CHECK_THROWS_AS(WindowAssembler(0, Timestamp{}), WindowError);
}

TEST_CASE("flush on advance and canonical ordering")
{
    WindowAssembler a(5, Timestamp{});
    CHECK(a.watermark() == -1);
    CHECK(a.ingest(rec(d2, 1)).empty());
    CHECK(a.ingest(rec(d1, 2)).empty());
    CHECK(a.ingest(rec(d1, 1.5)).empty());
    auto out = a.ingest(rec(d1, 6));
    REQUIRE(out.size() == 2);
    CHECK(out[0].key.device_mac == d1);
    CHECK(out[1].key.device_mac == d2);
    CHECK(out[0].packets.size() == 2);
    CHECK(out[0].packets[0].timestamp < out[0].packets[1].timestamp); // sorted
    CHECK(out[0].start_time == out[1].start_time);
    CHECK(a.watermark() == 0);

    // late record
    CHECK(a.ingest(rec(d2, 4.9)).empty());
    CHECK(a.late_drop_count() == 1);

    auto rest = a.flush_all();
    REQUIRE(rest.size() == 1);
    CHECK(rest[0].key.window_index == 1);
    CHECK(rest[0].start_time == Timestamp{5, 0});
    CHECK(a.ingest(rec(d1, 100)).empty());
    CHECK(a.late_drop_count() == 2);
    CHECK(a.flush_all().empty());
}

TEST_CASE("ties keep arrival order")
{
    WindowAssembler a(1, Timestamp{});
    auto r1 = rec(d1, 0.5, 10);
    auto r2 = rec(d1, 0.5, 20);
    auto r3 = rec(d1, 0.25, 30);
    a.ingest(r1);
    a.ingest(r2);
    a.ingest(r3);
    auto w = a.flush_all();
    REQUIRE(w.size() == 1);
    REQUIRE(w[0].packets.size() == 3);
    CHECK(w[0].packets[0].frame_len == 30);
    CHECK(w[0].packets[1].frame_len == 10);
    CHECK(w[0].packets[2].frame_len == 20);
}

TEST_CASE("empty windows for configured devices")
{
    WindowAssembler a(1, Timestamp{});
    a.set_empty_window_devices({d1, d2});
    a.ingest(rec(d1, 0.5));
    auto out = a.ingest(rec(d1, 3.5));
    // windows 0..2 for both devices, only d1@0 has data
    REQUIRE(out.size() == 6);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].key.window_index == static_cast<std::int64_t>(i / 2));
        CHECK(out[i].key.device_mac == (i % 2 ? d2 : d1));
        CHECK(out[i].packets.size() == (i == 0 ? 1u : 0u));
    }
}

TEST_CASE("advance_to closes by clock")
{
    WindowAssembler a(2, Timestamp{10, 0});
    a.ingest(rec(d1, 10.5));
    CHECK(a.advance_to(0).empty());
    auto out = a.advance_to(1);
    REQUIRE(out.size() == 1);
    CHECK(a.watermark() == 0);
}

TEST_CASE("conservation, containment and determinism on random streams")
{
    std::mt19937_64 rng(7);
    for (int round = 0; round < 50; ++round) {
        const double w = 0.5 + static_cast<double>(rng() % 40) / 10.0;
        const Timestamp t0{1'650'000'000, static_cast<std::uint32_t>(rng() % 1'000'000'000)};
        std::vector<PacketRecord> recs;
        std::int64_t clock = t0.to_nanos();
        for (int i = 0; i < 2000; ++i) {
            clock += static_cast<std::int64_t>(rng() % 50'000'000);
            // occasional reordering
            std::int64_t ts = clock - ((rng() % 20 == 0) ? static_cast<std::int64_t>(rng() % 3'000'000'000ULL) : 0);
            ts = std::max(ts, t0.to_nanos());
            PacketRecord r;
            r.device_mac = MacAddress({0x02, 0, 0, 0, 0, static_cast<std::uint8_t>(rng() % 4)});
            r.timestamp = Timestamp::from_nanos(ts);
            r.frame_len = static_cast<std::uint32_t>(i);
            recs.push_back(r);
        }
        auto run = [&] {
            WindowAssembler a(w, t0);
            std::vector<CompletedWindow> all;
            for (const auto& r : recs) {
                auto out = a.ingest(r);
                all.insert(all.end(), out.begin(), out.end());
            }
            auto tail = a.flush_all();
            all.insert(all.end(), tail.begin(), tail.end());
            return std::pair{all, a.late_drop_count()};
        };
        auto [windows, late] = run();
        std::size_t inside = 0;
        std::vector<int> seen(recs.size(), 0);
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& cw = windows[i];
            if (i) CHECK(windows[i - 1].key < cw.key);
            inside += cw.packets.size();
            for (const auto& p : cw.packets) {
                CHECK(p.timestamp >= cw.start_time);
                CHECK(nanos_between(p.timestamp, cw.start_time) < cw.length_ns);
                ++seen[p.frame_len];
            }
        }
        CHECK(inside + late == recs.size());
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c <= 1; }));

        auto [again, late2] = run();
        REQUIRE(again.size() == windows.size());
        CHECK(late2 == late);
        for (std::size_t i = 0; i < again.size(); ++i) {
            CHECK(again[i].key == windows[i].key);
            CHECK(again[i].packets.size() == windows[i].packets.size());
        }
    }
}
