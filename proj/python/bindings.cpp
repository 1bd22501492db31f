#include "iotfx/config.hpp"
#include "iotfx/engine.hpp"
#include "iotfx/features.hpp"
#include "iotfx/filter.hpp"
#include "iotfx/fixtures.hpp"
#include "iotfx/packet_decode.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace iotfx;

namespace {

py::handle config_error_type;
py::handle filter_error_type;
py::handle engine_error_type;

[[noreturn]] void raise(py::handle type, const std::string& message, py::dict attrs)
{
    py::object err = py::reinterpret_borrow<py::object>(type)(message);
    for (auto [k, v] : attrs) err.attr(k) = v;
    PyErr_SetObject(type.ptr(), err.ptr());
    throw py::error_already_set();
}

template <class F>
auto translating(F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const config::ConfigError& e) {
        py::dict a;
        a["code"] = std::string(config::error_code(e.error_kind()));
        a["path"] = e.path();
        a["offset"] = e.offset() ? py::cast(*e.offset()) : py::none();
        raise(config_error_type, e.what(), a);
    } catch (const filter::FilterError& e) {
        py::dict a;
        a["code"] = e.error_kind() == filter::FilterError::kind::syntax ? "syntax" : "value";
        a["offset"] = e.offset();
        a["expected"] = e.expected();
        raise(filter_error_type, e.what(), a);
    } catch (const engine::EngineError& e) {
        py::dict a;
        a["code"] = std::string(engine::error_code(e.error_kind()));
        raise(engine_error_type, e.what(), a);
    }
}

pcap::RawFrame frame_from(py::bytes data, std::optional<std::uint32_t> original_len)
{
    const std::string s = data;
    auto f = pcap::make_frame(Timestamp{}, std::vector<std::uint8_t>(s.begin(), s.end()));
    if (original_len) f.original_len = *original_len;
    return f;
}

const char* transport_name(Transport t)
{
    switch (t) {
    case Transport::tcp: return "tcp";
    case Transport::udp: return "udp";
    default: return "other";
    }
}

py::object decode(py::bytes data, std::uint32_t linktype, std::optional<std::uint32_t> original_len)
{
    auto res = decode_frame(frame_from(data, original_len), linktype);
    auto* p = std::get_if<DecodedPacket>(&res);
    if (!p) return py::none();
    py::dict d;
    auto opt_str = [](const auto& o) { return o ? py::cast(o->to_string()) : py::none(); };
    auto opt_num = [](const auto& o) { return o ? py::cast(*o) : py::none(); };
    d["src_mac"] = opt_str(p->src_mac);
    d["dst_mac"] = opt_str(p->dst_mac);
    d["frame_len"] = p->frame_len;
    d["transport"] = transport_name(p->transport);
    d["src_ip"] = opt_str(p->src_ip);
    d["dst_ip"] = opt_str(p->dst_ip);
    d["src_port"] = opt_num(p->src_port);
    d["dst_port"] = opt_num(p->dst_port);
    d["payload_len"] = opt_num(p->payload_len);
    return d;
}

py::dict status_dict(const engine::RunStatus& s)
{
    py::dict d;
    d["state"] = std::string(engine::to_string(s.state));
    d["packets_seen"] = s.packets_seen;
    d["packets_matched"] = s.packets_matched;
    d["packets_filtered"] = s.packets_filtered;
    d["packets_undecodable"] = s.packets_undecodable;
    d["records_projected"] = s.records_projected;
    d["records_windowed"] = s.records_windowed;
    d["late_drops"] = s.late_drops;
    d["windows_queued"] = s.windows_queued;
    d["windows_emitted"] = s.windows_emitted;
    d["queue_high_water"] = s.queue_high_water;
    d["queue_capacity"] = s.queue_capacity;
    d["warning"] = s.warning ? py::cast(*s.warning) : py::none();
    d["error"] = s.error ? py::cast(*s.error) : py::none();
    return d;
}

py::dict extract(const std::string& config_json, const std::filesystem::path& trace, const std::filesystem::path& out,
                 const std::vector<std::string>& own_macs, std::optional<std::uint64_t> stop_after_frames)
{
    return translating([&] {
        auto cfg = config::parse_config(config_json);
        engine::RunOptions opts;
        for (const auto& m : own_macs) {
            auto mac = MacAddress::parse(m);
            if (!mac) throw py::value_error("not a MAC address: " + m);
            opts.own_macs.push_back(*mac);
        }
        opts.stop_after_frames = stop_after_frames;
        engine::RunSummary summary;
        {
            py::gil_scoped_release release;
            summary = engine::run_offline(cfg, trace, out, opts);
        }
        py::dict d = status_dict(summary.status);
        py::list files;
        for (const auto& f : summary.files) files.append(py::str(f.path.string()));
        d["files"] = files;
        return d;
    });
}

void synth(const std::string& scenario, const std::filesystem::path& out, double mbps, std::optional<double> duration,
           std::optional<std::uint64_t> seed)
{
    fixtures::SynthOptions opts;
    if (scenario == "camera") {
        opts = fixtures::camera_scenario();
        if (duration) opts.duration_s = *duration;
        if (seed) opts.seed = *seed;
    } else if (scenario == "bulk") {
        opts = fixtures::bulk_scenario(mbps, duration.value_or(60), seed.value_or(7));
    } else {
        throw py::value_error("unknown scenario '" + scenario + "' (camera, bulk)");
    }
    fixtures::write_trace_file(out, fixtures::synthesize(opts));
}

} // namespace

PYBIND11_MODULE(_iotfx, m)
{
    m.doc() = "Windowed per-device traffic feature extraction";

    auto value_error = py::handle(PyExc_ValueError);
    config_error_type = py::exception<config::ConfigError>(m, "ConfigError", value_error).release();
    filter_error_type = py::exception<filter::FilterError>(m, "FilterError", value_error).release();
    engine_error_type = py::exception<engine::EngineError>(m, "EngineError", PyExc_RuntimeError).release();

    m.def("catalog", [] { return features::catalog_strings(); }, "All feature names in canonical order.");

    m.def(
        "normalize_config",
        [](const std::string& doc) { return translating([&] { return config::serialize_config(config::parse_config(doc)); }); },
        py::arg("document"), "Validates a config document and returns its canonical JSON.");

    m.def(
        "selected_features",
        [](const std::string& doc) { return translating([&] { return config::parse_config(doc).selector.names(); }); },
        py::arg("document"), "Feature columns a config would emit, in output order.");

    m.def(
        "normalize_filter",
        [](const std::string& text) { return translating([&] { return filter::render_filter(filter::parse_filter(text)); }); },
        py::arg("expression"), "Parses a capture filter and returns its canonical rendering.");

    m.def(
        "filter_matches",
        [](const std::string& text, py::bytes frame, std::uint32_t linktype) -> std::optional<bool> {
            auto expr = translating([&] { return filter::parse_filter(text); });
            auto res = decode_frame(frame_from(frame, std::nullopt), linktype);
            if (auto* p = std::get_if<DecodedPacket>(&res)) return filter::eval_filter(expr, *p);
            return std::nullopt;
        },
        py::arg("expression"), py::arg("frame"), py::arg("linktype") = pcap::linktype_ethernet,
        "Evaluates a filter against one frame; None when the frame is undecodable.");

    m.def("decode", &decode, py::arg("frame"), py::arg("linktype") = pcap::linktype_ethernet,
          py::arg("original_len") = py::none(), "Decoded header fields of one frame, or None.");

    m.def("extract", &extract, py::arg("config"), py::arg("trace"), py::arg("out_dir"),
          py::arg("own_macs") = std::vector<std::string>{}, py::arg("stop_after_frames") = py::none(),
          "Runs a config over a trace file and returns the final counters and output files.");

    m.def("synthesize", &synth, py::arg("scenario"), py::arg("out"), py::arg("mbps") = 5.0,
          py::arg("duration") = py::none(), py::arg("seed") = py::none(), "Writes a deterministic synthetic trace.");
}
