#pragma once

// HTTP control plane:
//
//   GET    /api/catalog
//   GET    /api/configs                  POST /api/configs
//   PUT    /api/configs/{name}           DELETE /api/configs/{name}
//   POST   /api/configs/{name}/start     POST /api/configs/{name}/stop
//   GET    /api/configs/{name}/status    GET  /api/configs/{name}/output[?run=<id>]
//   GET    /api/metrics
//
// Errors are JSON objects {code, message, path?} with a code from error_codes().

#include "iotfx/config.hpp"
#include "iotfx/engine.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace httplib {
class Server;
}

namespace iotfx::api {

/// The closed set of machine-readable error codes.
std::span<const std::string_view> error_codes();

struct ServiceOptions
{
    std::filesystem::path data_dir;
    /// Static web UI assets served at "/", if present.
    std::optional<std::filesystem::path> ui_dir;
    engine::RunOptions run_options;
};

class ControlService
{
public:
    explicit ControlService(ServiceOptions options);
    ~ControlService();

    ControlService(const ControlService&) = delete;
    ControlService& operator=(const ControlService&) = delete;

    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    /// Stops every active run gracefully.
    void shutdown_runs();

    httplib::Server& server() { return *server_; }

    std::filesystem::path run_root(const std::string& name) const;

private:
    void install_routes();
    std::string metrics_text();

    struct Totals
    {
        std::uint64_t runs_started = 0;
        std::uint64_t packets_seen = 0;
        std::uint64_t packets_matched = 0;
        std::uint64_t windows_emitted = 0;
        std::uint64_t late_drops = 0;
    };
    void fold_finished_run(const std::string& name, const engine::RunStatus& final_status);

    ServiceOptions options_;
    config::ConfigStore store_;
    engine::RunRegistry registry_;
    std::unique_ptr<httplib::Server> server_;
    std::chrono::steady_clock::time_point started_;

    // Serializes every per-config mutation (store + registry).
    mutable std::mutex action_mutex_;
    std::mutex totals_mutex_;
    std::map<std::string, Totals> totals_;
    std::map<std::string, std::shared_ptr<engine::Run>> folded_;
};

} // namespace iotfx::api
