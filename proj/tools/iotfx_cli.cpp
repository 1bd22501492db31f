#include "iotfx/config.hpp"
#include "iotfx/control_api.hpp"
#include "iotfx/engine.hpp"
#include "iotfx/features.hpp"
#include "iotfx/fixtures.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace iotfx;

config::CaptureConfig load_config_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config::parse_config(buf.str());
}

void print_config_error(const config::ConfigError& e)
{
    std::cerr << "error: " << config::error_code(e.error_kind()) << ": " << e.what();
    if (!e.path().empty()) std::cerr << " (at " << e.path() << ")";
    if (e.offset()) std::cerr << " [filter offset " << *e.offset() << "]";
    std::cerr << "\n";
}

std::vector<MacAddress> parse_macs(const std::vector<std::string>& texts)
{
    std::vector<MacAddress> out;
    for (const auto& t : texts) {
        auto m = MacAddress::parse(t);
        if (!m) throw std::runtime_error("invalid MAC address: " + t);
        out.push_back(*m);
    }
    return out;
}

api::ControlService* g_service = nullptr;

extern "C" void on_signal(int)
{
    if (g_service) g_service->stop();
}

int cmd_extract(const std::string& config_path, const std::string& pcap, const std::string& out,
                const std::vector<std::string>& own_macs)
{
    auto cfg = load_config_file(config_path);
    engine::RunOptions opts;
    opts.own_macs = parse_macs(own_macs);
    auto summary = engine::run_offline(cfg, pcap, out, opts);
    const auto& s = summary.status;
    std::cout << "state " << engine::to_string(s.state) << "\n"
              << "packets_seen " << s.packets_seen << "\n"
              << "packets_matched " << s.packets_matched << "\n"
              << "packets_undecodable " << s.packets_undecodable << "\n"
              << "windows_emitted " << s.windows_emitted << "\n"
              << "late_drops " << s.late_drops << "\n";
    for (const auto& f : summary.files) std::cout << "file " << f.path.string() << " " << f.size << "\n";
    if (s.warning) std::cerr << "warning: " << *s.warning << "\n";
    if (s.state != engine::RunState::finished) {
        std::cerr << "error: run ended in state " << engine::to_string(s.state);
        if (s.error) std::cerr << ": " << *s.error;
        std::cerr << "\n";
        return 1;
    }
    return 0;
}

int cmd_serve(const std::string& listen, const std::string& data, const std::string& ui,
              const std::vector<std::string>& own_macs)
{
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("--listen expects addr:port");
    std::string host = listen.substr(0, colon);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    int port = std::stoi(listen.substr(colon + 1));

    api::ServiceOptions opts;
    opts.data_dir = data;
    if (!ui.empty()) opts.ui_dir = ui;
    opts.run_options.own_macs = parse_macs(own_macs);
    api::ControlService service(std::move(opts));
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << host << ":" << port << "\n";
    bool ok = service.listen(host, port);
    service.shutdown_runs();
    g_service = nullptr;
    if (!ok) {
        std::cerr << "error: cannot listen on " << listen << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Per-device network traffic feature extraction"};
    app.require_subcommand(1);

    std::string config_path, pcap_path, out_dir;
    std::vector<std::string> own_macs;
    auto* extract = app.add_subcommand("extract", "Run a config over a pcap trace");
    extract->add_option("--config", config_path, "Config JSON file")->required();
    extract->add_option("--pcap", pcap_path, "Input trace")->required();
    extract->add_option("--out", out_dir, "Output directory")->required();
    extract->add_option("--own-mac", own_macs, "MAC of the capture point (excluded from discovery)");

    auto* validate = app.add_subcommand("validate", "Parse and validate a config");
    validate->add_option("--config", config_path, "Config JSON file")->required();
    bool canonical = false;
    validate->add_flag("--print", canonical, "Print the canonical form");

    auto* catalog = app.add_subcommand("catalog", "List all feature names");

    std::string listen = "127.0.0.1:8080", data_dir, ui_dir;
    auto* serve = app.add_subcommand("serve", "Run the HTTP control service");
    serve->add_option("--listen", listen, "addr:port")->capture_default_str();
    serve->add_option("--data", data_dir, "Data directory")->required();
    serve->add_option("--ui", ui_dir, "Static UI directory");
    serve->add_option("--own-mac", own_macs, "MAC of the capture point (excluded from discovery)");

    std::string scenario = "camera";
    double mbps = 5, duration = 60;
    std::uint64_t seed = 7;
    auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic trace");
    synth->add_option("--scenario", scenario, "camera | bulk")->check(CLI::IsMember({"camera", "bulk"}));
    synth->add_option("--mbps", mbps, "Target rate (bulk)");
    synth->add_option("--duration", duration, "Seconds (bulk)");
    synth->add_option("--seed", seed, "RNG seed (bulk)");
    synth->add_option("--out", out_dir, "Output pcap")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*extract) return cmd_extract(config_path, pcap_path, out_dir, own_macs);
        if (*validate) {
            auto cfg = load_config_file(config_path);
            if (canonical)
                std::cout << config::serialize_config(cfg);
            else
                std::cout << "ok " << cfg.name << " (" << cfg.selector.indices().size() << " features)\n";
            return 0;
        }
        if (*catalog) {
            for (const auto& n : features::catalog_strings()) std::cout << n << "\n";
            return 0;
        }
        if (*serve) return cmd_serve(listen, data_dir, ui_dir, own_macs);
        if (*synth) {
            auto opts = scenario == "camera" ? fixtures::camera_scenario()
                                             : fixtures::bulk_scenario(mbps, duration, seed);
            auto frames = fixtures::synthesize(opts);
            fixtures::write_trace_file(out_dir, frames);
            std::cout << frames.size() << " frames\n";
            return 0;
        }
    } catch (const config::ConfigError& e) {
        print_config_error(e);
        return 2;
    } catch (const engine::EngineError& e) {
        std::cerr << "error: " << engine::error_code(e.error_kind()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
