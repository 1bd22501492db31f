#include "iotfx/features.hpp"
#include "iotfx/fixtures.hpp"
#include "service_fixture.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <thread>

using namespace iotfx;
using iotfx::testing::ServiceFixture;
using nlohmann::json;

namespace {

const char* json_type = "application/json";

std::string doc(const std::string& name, const std::string& extra = "")
{
    return R"({"name":")" + name + R"(","window_seconds":2,"features":["pkt_len.all.*"])" + extra + "}";
}

std::string pcap_source(const std::filesystem::path& p, double speed = 0)
{
    return json{{"source", {{"type", "pcap"}, {"path", p.string()}, {"speed", speed}}}}.dump();
}

json wait_state(httplib::Client& c, const std::string& name, const std::set<std::string>& states)
{
    for (int i = 0; i < 2000; ++i) {
        auto r = c.Get("/api/configs/" + name + "/status");
        auto j = json::parse(r->body);
        if (states.count(j["state"].get<std::string>())) return j;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("state not reached");
    return {};
}

std::string metric(const std::string& text, const std::string& key)
{
    auto pos = text.find(key + " ");
    if (pos == std::string::npos) return "";
    auto end = text.find('\n', pos);
    return text.substr(pos + key.size() + 1, end - pos - key.size() - 1);
}

} // namespace

TEST_CASE("catalog and listing")
{
    ServiceFixture svc;
    auto& c = svc.http();
    auto cat = c.Get("/api/catalog");
    REQUIRE(cat);
    CHECK(cat->status == 200);
    auto names = json::parse(cat->body);
    CHECK(names.size() == 329);
    CHECK(names.front() == features::catalog_strings().front());
    CHECK(names.back() == features::catalog_strings().back());
    CHECK(c.Get("/api/catalog")->body == cat->body);

    auto list = c.Get("/api/configs");
    CHECK(list->status == 200);
    CHECK(json::parse(list->body) == json::array());

    auto root = c.Get("/");
    CHECK(root->status == 200);

    auto metrics = c.Get("/api/metrics");
    CHECK(metrics->status == 200);
    CHECK(metrics->body.find("iotfx_process_uptime_seconds") != std::string::npos);
    CHECK(metrics->body.find("config=") == std::string::npos);
}

TEST_CASE("config CRUD and error bodies")
{
    ServiceFixture svc;
    auto& c = svc.http();

    auto created = c.Post("/api/configs", doc("a", R"(,"capture_filter":"udp  &&  port 53")"), json_type);
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(json::parse(created->body)["capture_filter"] == "udp and port 53");

    auto dup = c.Post("/api/configs", doc("a"), json_type);
    CHECK(dup->status == 409);
    CHECK(json::parse(dup->body)["code"] == "name_exists");

    auto bad_filter = c.Post("/api/configs", doc("b", R"(,"capture_filter":"tcp or")"), json_type);
    CHECK(bad_filter->status == 400);
    auto bf = json::parse(bad_filter->body);
    CHECK(bf["code"] == "invalid_filter");
    CHECK(bf["offset"] == 6);
    CHECK(bf["path"] == "/capture_filter");

    auto bad_window =
        c.Post("/api/configs", R"({"name":"w","window_seconds":0,"features":["*"]})", json_type);
    CHECK(json::parse(bad_window->body)["code"] == "non_positive_window");
    auto bad_feature = c.Post("/api/configs", R"({"name":"w","window_seconds":1,"features":["x"]})", json_type);
    CHECK(json::parse(bad_feature->body)["code"] == "unknown_feature");
    auto bad_json = c.Post("/api/configs", "{", json_type);
    CHECK(bad_json->status == 400);
    CHECK(json::parse(bad_json->body)["code"] == "schema_error");

    auto list = json::parse(c.Get("/api/configs")->body);
    REQUIRE(list.size() == 1);
    CHECK(list[0]["state"] == "idle");
    CHECK(list[0]["window_seconds"] == 2);

    auto got = c.Get("/api/configs/a");
    CHECK(got->status == 200);
    CHECK(c.Get("/api/configs/zzz")->status == 404);

    auto edited = c.Put("/api/configs/a", doc("a", R"(,"description":"edited")"), json_type);
    CHECK(edited->status == 200);
    CHECK(json::parse(c.Get("/api/configs/a")->body)["description"] == "edited");
    CHECK(c.Put("/api/configs/a", doc("other"), json_type)->status == 400);
    CHECK(c.Put("/api/configs/nope", doc("nope"), json_type)->status == 404);

    CHECK(c.Get("/api/configs/a/status")->status == 200);
    CHECK(json::parse(c.Get("/api/configs/a/status")->body)["state"] == "idle");
    CHECK(c.Get("/api/configs/nope/status")->status == 404);
    auto no_out = c.Get("/api/configs/a/output");
    CHECK(no_out->status == 404);
    CHECK(json::parse(no_out->body)["code"] == "no_output");

    auto stop_idle = c.Post("/api/configs/a/stop", "", json_type);
    CHECK(stop_idle->status == 409);
    CHECK(json::parse(stop_idle->body)["code"] == "not_running");

    CHECK(c.Delete("/api/configs/nope")->status == 404);
    CHECK(c.Delete("/api/configs/a")->status == 200);
    CHECK(json::parse(c.Get("/api/configs")->body).empty());

    for (const auto& code : api::error_codes()) CHECK_FALSE(code.empty());
}

TEST_CASE("run lifecycle over HTTP")
{
    ServiceFixture svc;
    auto& c = svc.http();
    const auto trace = svc.scratch() / "t.pcap";
    fixtures::write_trace_file(trace, fixtures::synthesize(fixtures::camera_scenario()));

    REQUIRE(c.Post("/api/configs", doc("cam"), json_type)->status == 201);

    auto missing = c.Post("/api/configs/cam/start", pcap_source(svc.scratch() / "missing.pcap"), json_type);
    CHECK(missing->status == 400);
    CHECK(json::parse(missing->body)["code"] == "source_unavailable");
    auto no_iface = c.Post("/api/configs/cam/start",
                           R"({"source":{"type":"live","interface":"no-such-iface0"}})", json_type);
    CHECK(no_iface->status == 400);
    CHECK(json::parse(no_iface->body)["code"] == "source_unavailable");
    auto bad_body = c.Post("/api/configs/cam/start", R"({"source":{"type":"carrier-pigeon"}})", json_type);
    CHECK(bad_body->status == 400);
    CHECK(c.Post("/api/configs/ghost/start", pcap_source(trace), json_type)->status == 404);

    // fast run to completion
    auto started = c.Post("/api/configs/cam/start", pcap_source(trace), json_type);
    REQUIRE(started->status == 202);
    auto st = json::parse(started->body);
    CHECK((st["state"] == "running" || st["state"] == "finished"));
    auto done = wait_state(c, "cam", {"finished"});
    CHECK(done["windows_emitted"].get<int>() > 0);
    CHECK(json::parse(c.Get("/api/configs")->body)[0]["state"] == "finished");

    auto out = c.Get("/api/configs/cam/output");
    REQUIRE(out->status == 200);
    CHECK(out->get_header_value("Content-Type") == "application/gzip");
    auto files = testing::read_tar_gz(out->body);
    REQUIRE(files.size() == 1);
    auto lines = testing::split_lines(files.begin()->second);
    CHECK(lines.size() == done["windows_emitted"].get<std::size_t>() + 1);
    const std::string first_run = done["run_id"];

    auto m = c.Get("/api/metrics")->body;
    CHECK(metric(m, "iotfx_windows_emitted_total{config=\"cam\"}") == std::to_string(lines.size() - 1));

    // slow run: observable as running, start twice, delete refused, stop
    auto slow = c.Post("/api/configs/cam/start", pcap_source(trace, 1.0), json_type);
    REQUIRE(slow->status == 202);
    CHECK(json::parse(slow->body)["run_id"] != first_run);
    wait_state(c, "cam", {"running"});
    CHECK(json::parse(c.Get("/api/configs")->body)[0]["state"] == "running");
    auto twice = c.Post("/api/configs/cam/start", pcap_source(trace), json_type);
    CHECK(twice->status == 409);
    CHECK(json::parse(twice->body)["code"] == "already_running");
    CHECK(c.Delete("/api/configs/cam")->status == 409);
    CHECK(c.Put("/api/configs/cam", doc("cam"), json_type)->status == 409);
    auto st2 = json::parse(c.Get("/api/configs/cam/status")->body);
    CHECK(st2["queue_depth"].get<int>() <= st2["queue_capacity"].get<int>());

    auto stopped = c.Post("/api/configs/cam/stop", "", json_type);
    REQUIRE(stopped->status == 200);
    auto summary = json::parse(stopped->body);
    CHECK(summary["state"] == "finished");
    CHECK(json::parse(c.Get("/api/configs/cam/status")->body)["state"] == "finished");
    CHECK(c.Post("/api/configs/cam/stop", "", json_type)->status == 409);

    // older run still downloadable by id
    CHECK(c.Get("/api/configs/cam/output?run=" + first_run)->status == 200);
    CHECK(c.Get("/api/configs/cam/output?run=nope")->status == 404);
    CHECK(c.Get("/api/configs/cam/output?run=..")->status == 404);

    // metrics keep growing across runs, labeled per config
    auto m2 = c.Get("/api/metrics")->body;
    CHECK(metric(m2, "iotfx_runs_started_total{config=\"cam\"}") == "2");
    CHECK(std::stoull(metric(m2, "iotfx_packets_seen_total{config=\"cam\"}")) >=
          std::stoull(metric(m, "iotfx_packets_seen_total{config=\"cam\"}")));

    CHECK(c.Delete("/api/configs/cam")->status == 200);
    CHECK_FALSE(std::filesystem::exists(svc.data_dir() / "cam"));
}

TEST_CASE("two configs report separately")
{
    ServiceFixture svc;
    auto& c = svc.http();
    const auto trace = svc.scratch() / "t.pcap";
    fixtures::write_trace_file(trace, fixtures::synthesize(fixtures::camera_scenario()));
    REQUIRE(c.Post("/api/configs", doc("one"), json_type)->status == 201);
    REQUIRE(c.Post("/api/configs", doc("two", R"(,"capture_filter":"tcp")"), json_type)->status == 201);
    REQUIRE(c.Post("/api/configs/one/start", pcap_source(trace), json_type)->status == 202);
    REQUIRE(c.Post("/api/configs/two/start", pcap_source(trace), json_type)->status == 202);
    wait_state(c, "one", {"finished"});
    wait_state(c, "two", {"finished"});
    auto m = c.Get("/api/metrics")->body;
    CHECK_FALSE(metric(m, "iotfx_windows_emitted_total{config=\"one\"}").empty());
    CHECK_FALSE(metric(m, "iotfx_windows_emitted_total{config=\"two\"}").empty());
    CHECK(metric(m, "iotfx_packets_matched_total{config=\"one\"}") !=
          metric(m, "iotfx_packets_matched_total{config=\"two\"}"));
}
