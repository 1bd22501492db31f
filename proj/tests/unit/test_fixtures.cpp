#include "iotfx/fixtures.hpp"
#include "iotfx/packet_decode.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace iotfx;
namespace fx = iotfx::fixtures;

TEST_CASE("synthesis is deterministic and seed-sensitive")
{
    auto a = fx::synthesize(fx::camera_scenario());
    auto b = fx::synthesize(fx::camera_scenario());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].timestamp == b[i].timestamp);
        CHECK(a[i].data == b[i].data);
    }
    auto opts = fx::camera_scenario();
    opts.seed += 1;
    auto c = fx::synthesize(opts);
    bool differs = c.size() != a.size();
    for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = a[i].data != c[i].data || a[i].timestamp != c[i].timestamp;
    CHECK(differs);
}

TEST_CASE("bundled trace matches a fresh synthesis")
{
    testing::TempDir dir;
    fx::write_trace_file(dir / "t.pcap", fx::synthesize(fx::camera_scenario()));
    CHECK(testing::read_file(dir / "t.pcap") == testing::read_file(testing::bundled_fixture_trace()));
}

TEST_CASE("timestamps are sorted, in range, and every camera speaks in every window")
{
    const auto opts = fx::camera_scenario();
    const auto frames = fx::synthesize(opts);
    const auto end = opts.start.to_nanos() + static_cast<std::int64_t>(opts.duration_s * 1e9);
    std::map<std::string, std::set<std::int64_t>> windows;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto ns = frames[i].timestamp.to_nanos();
        CHECK(ns >= opts.start.to_nanos());
        CHECK(ns < end);
        if (i) CHECK(frames[i - 1].timestamp <= frames[i].timestamp);
        auto d = decode_frame(frames[i], pcap::linktype_ethernet);
        if (auto* p = std::get_if<DecodedPacket>(&d); p && p->src_mac)
            windows[p->src_mac->to_string()].insert((ns - opts.start.to_nanos()) / 2'000'000'000LL);
    }
    for (const char* cam : {"3c:8c:f8:00:00:01", "5c:62:8b:00:00:02", "d8:1f:12:00:00:03"})
        CHECK(windows[cam].size() == 30);
    CHECK(windows["a4:83:e7:00:00:04"].size() < 30);
}

TEST_CASE("bulk scenario hits the requested rate")
{
    const auto opts = fx::bulk_scenario(5, 10);
    const auto frames = fx::synthesize(opts);
    std::uint64_t bulk_bytes = 0;
    for (const auto& f : frames) {
        auto d = decode_frame(f, pcap::linktype_ethernet);
        if (auto* p = std::get_if<DecodedPacket>(&d); p && p->src_mac && p->src_mac->to_string() == "b8:27:eb:00:00:10")
            bulk_bytes += p->frame_len;
    }
    const double mbps = bulk_bytes * 8.0 / 10 / 1e6;
    CHECK(mbps > 4.5);
    CHECK(mbps < 5.5);
}
