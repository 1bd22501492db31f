#include "iotfx/control_api.hpp"

#include "iotfx/features.hpp"
#include "iotfx/output.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <ctime>

namespace iotfx::api {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 16> codes = {
    "schema_error",   "invalid_mac",    "invalid_filter",     "unknown_feature",
    "non_positive_window", "name_exists", "name_mismatch",   "not_found",
    "running",        "already_running", "not_running",       "source_unavailable",
    "trace_unreadable", "no_output",     "io_failure",        "internal",
};

struct ApiError
{
    int status;
    std::string code;
    std::string message;
    std::optional<std::string> path;
    std::optional<std::size_t> offset;
};

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e)
{
    json body = {{"code", e.code}, {"message", e.message}};
    if (e.path) body["path"] = *e.path;
    if (e.offset) body["offset"] = *e.offset;
    send_json(res, e.status, body);
}

ApiError from_config_error(const config::ConfigError& e)
{
    return {400, std::string(config::error_code(e.error_kind())), e.what(), e.path(), e.offset()};
}

ApiError from_engine_error(const engine::EngineError& e)
{
    using K = engine::EngineError::kind;
    switch (e.error_kind()) {
    case K::already_running:
        return {409, "already_running", e.what()};
    case K::not_running:
        return {409, "not_running", e.what()};
    case K::source_unavailable:
        return {400, "source_unavailable", e.what()};
    case K::trace_unreadable:
        return {400, "trace_unreadable", e.what()};
    case K::config_invalid:
        return {400, "schema_error", e.what()};
    case K::io_failure:
        break;
    }
    return {500, "io_failure", e.what()};
}

json timestamp_json(const std::optional<Timestamp>& ts)
{
    return ts ? json(format_timestamp(*ts)) : json(nullptr);
}

json status_json(const engine::RunStatus& s)
{
    return {
        {"state", std::string(engine::to_string(s.state))},
        {"packets_seen", s.packets_seen},
        {"packets_matched", s.packets_matched},
        {"packets_filtered", s.packets_filtered},
        {"packets_undecodable", s.packets_undecodable},
        {"records_projected", s.records_projected},
        {"late_drops", s.late_drops},
        {"windows_emitted", s.windows_emitted},
        {"queue_depth", s.queue_depth},
        {"queue_high_water", s.queue_high_water},
        {"queue_capacity", s.queue_capacity},
        {"started_at", timestamp_json(s.started_at)},
        {"finished_at", timestamp_json(s.finished_at)},
        {"error", s.error ? json(*s.error) : json(nullptr)},
        {"warning", s.warning ? json(*s.warning) : json(nullptr)},
    };
}

json summary_json(const engine::RunSummary& s)
{
    json files = json::array();
    for (const auto& f : s.files)
        files.push_back({{"name", f.path.filename().string()}, {"size", f.size}});
    json out = status_json(s.status);
    out["run_id"] = s.run_dir.filename().string();
    out["files"] = std::move(files);
    return out;
}

std::string run_id_now()
{
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::system_clock::to_time_t(now);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count() % 1'000'000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02d%02d%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<long long>(micros));
    return buf;
}

bool valid_run_id(std::string_view id)
{
    if (id.empty() || id.size() > 64 || id.find("..") != std::string_view::npos) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    });
}

std::optional<engine::SourceSpec> parse_source(const json& body, ApiError& err)
{
    err = {400, "schema_error", "", "/source"};
    if (!body.is_object() || !body.contains("source") || !body["source"].is_object()) {
        err.message = "request body must be {\"source\": {...}}";
        return std::nullopt;
    }
    const json& src = body["source"];
    if (!src.contains("type") || !src["type"].is_string()) {
        err.path = "/source/type";
        err.message = "source.type must be \"pcap\" or \"live\"";
        return std::nullopt;
    }
    engine::SourceSpec spec;
    const auto type = src["type"].get<std::string>();
    if (type == "pcap") {
        if (!src.contains("path") || !src["path"].is_string()) {
            err.path = "/source/path";
            err.message = "pcap source needs a string path";
            return std::nullopt;
        }
        spec.type = engine::SourceSpec::kind::pcap;
        spec.location = src["path"].get<std::string>();
        if (src.contains("speed")) {
            if (!src["speed"].is_number() || src["speed"].get<double>() < 0) {
                err.path = "/source/speed";
                err.message = "speed must be a non-negative number";
                return std::nullopt;
            }
            spec.speed = src["speed"].get<double>();
        }
    } else if (type == "live") {
        if (!src.contains("interface") || !src["interface"].is_string()) {
            err.path = "/source/interface";
            err.message = "live source needs an interface name";
            return std::nullopt;
        }
        spec.type = engine::SourceSpec::kind::live;
        spec.location = src["interface"].get<std::string>();
    } else {
        err.path = "/source/type";
        err.message = "source.type must be \"pcap\" or \"live\"";
        return std::nullopt;
    }
    return spec;
}

constexpr const char* fallback_index = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>iotfx</title></head>
<body><h1>iotfx control service</h1>
<p>No UI assets installed. The JSON API lives under <code>/api/</code>:
<a href="/api/configs">configs</a>, <a href="/api/catalog">catalog</a>, <a href="/api/metrics">metrics</a>.</p>
</body></html>
)";

} // namespace

std::span<const std::string_view> error_codes() { return codes; }

ControlService::ControlService(ServiceOptions options)
    : options_(std::move(options)), store_(options_.data_dir / ".configs"),
      server_(std::make_unique<httplib::Server>()), started_(std::chrono::steady_clock::now())
{
    install_routes();
}

ControlService::~ControlService()
{
    stop();
    shutdown_runs();
}

fs::path ControlService::run_root(const std::string& name) const
{
    return options_.data_dir / name;
}

bool ControlService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int ControlService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool ControlService::listen_after_bind() { return server_->listen_after_bind(); }
void ControlService::stop() { server_->stop(); }

void ControlService::shutdown_runs()
{
    for (const auto& run : registry_.runs()) {
        try {
            if (run->active()) run->stop();
        } catch (const engine::EngineError&) {
            // finished between the check and the stop
        }
    }
}

void ControlService::fold_finished_run(const std::string& name, const engine::RunStatus& s)
{
    auto& t = totals_[name];
    t.packets_seen += s.packets_seen;
    t.packets_matched += s.packets_matched;
    t.windows_emitted += s.windows_emitted;
    t.late_drops += s.late_drops;
}

std::string ControlService::metrics_text()
{
    std::string out;
    auto line = [&](const std::string& metric, const std::string& labels, auto value) {
        out += metric;
        if (!labels.empty()) out += "{" + labels + "}";
        out += ' ';
        out += std::to_string(value);
        out += '\n';
    };

    const auto uptime =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - started_).count();
    line("iotfx_process_uptime_seconds", "", uptime);

    std::lock_guard lock(totals_mutex_);
    for (const auto& run : registry_.runs()) {
        const std::string& name = run->config().name;
        if (!run->active() && folded_[name] != run) {
            fold_finished_run(name, run->status());
            folded_[name] = run;
        }
    }
    std::uint64_t all_runs = 0;
    for (const auto& [_, t] : totals_) all_runs += t.runs_started;
    line("iotfx_runs_started_total", "", all_runs);

    for (const auto& [name, totals] : totals_) {
        Totals t = totals;
        auto run = registry_.find(name);
        std::optional<engine::RunStatus> live;
        if (run && folded_.count(name) && folded_.at(name) == run) run = nullptr; // already folded
        if (run) {
            live = run->status();
            t.packets_seen += live->packets_seen;
            t.packets_matched += live->packets_matched;
            t.windows_emitted += live->windows_emitted;
            t.late_drops += live->late_drops;
        }
        const std::string l = "config=\"" + name + "\"";
        line("iotfx_runs_started_total", l, t.runs_started);
        line("iotfx_packets_seen_total", l, t.packets_seen);
        line("iotfx_packets_matched_total", l, t.packets_matched);
        line("iotfx_windows_emitted_total", l, t.windows_emitted);
        line("iotfx_late_drops_total", l, t.late_drops);

        auto latest = registry_.find(name);
        if (latest) {
            auto s = latest->status();
            line("iotfx_run_active", l, latest->active() ? 1 : 0);
            line("iotfx_run_windows_emitted", l, s.windows_emitted);
            line("iotfx_run_queue_depth", l, s.queue_depth);
            line("iotfx_run_queue_capacity", l, s.queue_capacity);
        }
    }
    return out;
}

void ControlService::install_routes()
{
    auto& srv = *server_;

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unexpected failure";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_error(res, {500, "internal", what});
    });

    if (options_.ui_dir && fs::is_directory(*options_.ui_dir)) {
        srv.set_mount_point("/", options_.ui_dir->string());
    } else {
        srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(fallback_index, "text/html");
        });
    }

    srv.Get("/api/catalog", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json(features::catalog_strings()));
    });

    srv.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(metrics_text(), "text/plain; version=0.0.4");
    });

    srv.Get("/api/configs", [this](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        for (const auto& name : store_.list()) {
            try {
                auto c = store_.load(name);
                auto run = registry_.find(name);
                auto state = run ? run->status().state : engine::RunState::idle;
                list.push_back({{"name", c.name},
                                {"description", c.description},
                                {"window_seconds", c.window_seconds},
                                {"state", std::string(engine::to_string(state))}});
            } catch (const std::exception&) {
                // removed concurrently or unreadable; skip
            }
        }
        send_json(res, 200, list);
    });

    srv.Post("/api/configs", [this](const httplib::Request& req, httplib::Response& res) {
        config::CaptureConfig c;
        try {
            c = config::parse_config(req.body);
        } catch (const config::ConfigError& e) {
            return send_error(res, from_config_error(e));
        }
        std::lock_guard lock(action_mutex_);
        if (store_.exists(c.name))
            return send_error(res, {409, "name_exists", "config '" + c.name + "' already exists", "/name"});
        store_.save(c);
        send_json(res, 201, json::parse(config::serialize_config(c)));
    });

    srv.Get(R"(/api/configs/([A-Za-z0-9_-]{1,64}))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        try {
            send_json(res, 200, json::parse(config::serialize_config(store_.load(name))));
        } catch (const config::StoreError&) {
            send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
        }
    });

    srv.Put(R"(/api/configs/([A-Za-z0-9_-]{1,64}))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        config::CaptureConfig c;
        try {
            c = config::parse_config(req.body);
        } catch (const config::ConfigError& e) {
            return send_error(res, from_config_error(e));
        }
        if (c.name != name)
            return send_error(res, {400, "name_mismatch", "body name does not match the URL", "/name"});
        std::lock_guard lock(action_mutex_);
        if (!store_.exists(name)) return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
        if (registry_.active(name)) return send_error(res, {409, "running", "config '" + name + "' is running"});
        store_.save(c);
        send_json(res, 200, json::parse(config::serialize_config(c)));
    });

    srv.Delete(R"(/api/configs/([A-Za-z0-9_-]{1,64}))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        std::lock_guard lock(action_mutex_);
        if (!store_.exists(name)) return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
        if (registry_.active(name)) return send_error(res, {409, "running", "config '" + name + "' is running"});
        store_.remove(name);
        {
            std::lock_guard tl(totals_mutex_);
            if (auto run = registry_.find(name); run && folded_[name] != run) {
                fold_finished_run(name, run->status());
                folded_[name] = run;
            }
        }
        registry_.forget(name);
        {
            std::lock_guard tl(totals_mutex_);
            folded_.erase(name);
        }
        std::error_code ec;
        fs::remove_all(run_root(name), ec);
        send_json(res, 200, {{"deleted", name}});
    });

    srv.Post(R"(/api/configs/([A-Za-z0-9_-]{1,64})/start)",
             [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string name = req.matches[1];
                 json body;
                 try {
                     body = req.body.empty() ? json::object() : json::parse(req.body);
                 } catch (const json::parse_error& e) {
                     return send_error(res, {400, "schema_error", std::string("malformed JSON: ") + e.what()});
                 }
                 ApiError err;
                 auto spec = parse_source(body, err);
                 if (!spec) return send_error(res, err);

                 std::lock_guard lock(action_mutex_);
                 config::CaptureConfig c;
                 try {
                     c = store_.load(name);
                 } catch (const config::StoreError&) {
                     return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
                 }
                 if (registry_.active(name))
                     return send_error(res, {409, "already_running", "config '" + name + "' is already running"});

                 std::string run_id = run_id_now();
                 fs::path run_dir = run_root(name) / run_id;
                 for (int n = 1; fs::exists(run_dir); ++n) run_dir = run_root(name) / (run_id + "-" + std::to_string(n));

                 {
                     std::lock_guard tl(totals_mutex_);
                     if (auto prev = registry_.find(name); prev && folded_[name] != prev) {
                         fold_finished_run(name, prev->status());
                         folded_[name] = prev;
                     }
                 }
                 std::shared_ptr<engine::Run> run;
                 try {
                     run = registry_.start(c, *spec, run_dir, options_.run_options);
                 } catch (const engine::EngineError& e) {
                     std::error_code ec;
                     fs::remove_all(run_dir, ec);
                     return send_error(res, from_engine_error(e));
                 }
                 {
                     std::lock_guard tl(totals_mutex_);
                     ++totals_[name].runs_started;
                 }
                 json out = status_json(run->status());
                 out["run_id"] = run_dir.filename().string();
                 send_json(res, 202, out);
             });

    srv.Post(R"(/api/configs/([A-Za-z0-9_-]{1,64})/stop)",
             [this](const httplib::Request& req, httplib::Response& res) {
                 const std::string name = req.matches[1];
                 std::shared_ptr<engine::Run> run;
                 {
                     std::lock_guard lock(action_mutex_);
                     if (!store_.exists(name))
                         return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
                     run = registry_.find(name);
                 }
                 if (!run) return send_error(res, {409, "not_running", "config '" + name + "' is not running"});
                 try {
                     // Draining may take a while; other endpoints stay responsive.
                     send_json(res, 200, summary_json(run->stop()));
                 } catch (const engine::EngineError& e) {
                     send_error(res, from_engine_error(e));
                 }
             });

    srv.Get(R"(/api/configs/([A-Za-z0-9_-]{1,64})/status)",
            [this](const httplib::Request& req, httplib::Response& res) {
                const std::string name = req.matches[1];
                if (!store_.exists(name))
                    return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});
                auto run = registry_.find(name);
                if (!run) {
                    engine::RunStatus idle;
                    json out = status_json(idle);
                    out["run_id"] = nullptr;
                    return send_json(res, 200, out);
                }
                json out = status_json(run->status());
                out["run_id"] = run->run_dir().filename().string();
                send_json(res, 200, out);
            });

    srv.Get(R"(/api/configs/([A-Za-z0-9_-]{1,64})/output)",
            [this](const httplib::Request& req, httplib::Response& res) {
                const std::string name = req.matches[1];
                if (!store_.exists(name))
                    return send_error(res, {404, "not_found", "config '" + name + "' does not exist"});

                const fs::path root = run_root(name);
                std::string run_id;
                if (req.has_param("run")) {
                    run_id = req.get_param_value("run");
                    if (!valid_run_id(run_id) || !fs::is_directory(root / run_id))
                        return send_error(res, {404, "no_output", "no run '" + run_id + "' for '" + name + "'"});
                } else {
                    std::error_code ec;
                    for (const auto& entry : fs::directory_iterator(root, ec))
                        if (entry.is_directory()) run_id = std::max(run_id, entry.path().filename().string());
                    if (run_id.empty())
                        return send_error(res, {404, "no_output", "config '" + name + "' has no output yet"});
                }

                std::vector<std::uint8_t> archive;
                try {
                    archive = output::package_archive(root / run_id);
                } catch (const output::OutputError& e) {
                    return send_error(res, {500, "io_failure", e.what()});
                }
                res.status = 200;
                res.set_header("Content-Disposition",
                               "attachment; filename=\"" + name + "-" + run_id + ".tar.gz\"");
                res.set_content(std::string(archive.begin(), archive.end()), "application/gzip");
            });
}

} // namespace iotfx::api
