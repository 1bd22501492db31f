#include "iotfx/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace iotfx::config {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<std::string> CaptureConfig::label_for(const MacAddress& mac) const
{
    for (const auto& d : devices)
        if (d.mac == mac) return d.label;
    return std::nullopt;
}

std::string_view error_code(ConfigError::kind k)
{
    switch (k) {
    case ConfigError::kind::schema_error:
        return "schema_error";
    case ConfigError::kind::invalid_mac:
        return "invalid_mac";
    case ConfigError::kind::invalid_filter:
        return "invalid_filter";
    case ConfigError::kind::unknown_feature:
        return "unknown_feature";
    case ConfigError::kind::non_positive_window:
        return "non_positive_window";
    }
    return "schema_error";
}

bool valid_config_name(std::string_view name)
{
    if (name.empty() || name.size() > 64) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& msg)
{
    throw ConfigError(ConfigError::kind::schema_error, path, "config " + (path.empty() ? "/" : path) + ": " + msg);
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed)
{
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            schema(path + "/" + key, "unexpected field");
    }
}

const json* field(const json& obj, const char* key)
{
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::string need_string(const json& v, const std::string& path)
{
    if (!v.is_string()) schema(path, "expected a string");
    return v.get<std::string>();
}

bool need_bool(const json& v, const std::string& path)
{
    if (!v.is_boolean()) schema(path, "expected a boolean");
    return v.get<bool>();
}

OutputOptions parse_output(const json& v)
{
    const std::string path = "/output";
    if (!v.is_object()) schema(path, "expected an object");
    only_keys(v, path,
              {"include_header", "per_device_files", "timestamp_mode", "include_label", "emit_empty_windows"});
    OutputOptions o;
    if (auto f = field(v, "include_header")) o.include_header = need_bool(*f, path + "/include_header");
    if (auto f = field(v, "per_device_files")) o.per_device_files = need_bool(*f, path + "/per_device_files");
    if (auto f = field(v, "include_label")) o.include_label = need_bool(*f, path + "/include_label");
    if (auto f = field(v, "emit_empty_windows")) o.emit_empty_windows = need_bool(*f, path + "/emit_empty_windows");
    if (auto f = field(v, "timestamp_mode")) {
        auto mode = need_string(*f, path + "/timestamp_mode");
        if (mode == "absolute")
            o.timestamp_mode = TimestampMode::absolute;
        else if (mode == "relative")
            o.timestamp_mode = TimestampMode::relative;
        else
            schema(path + "/timestamp_mode", "expected \"absolute\" or \"relative\"");
    }
    return o;
}

} // namespace

CaptureConfig parse_config(std::string_view document)
{
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        schema("", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) schema("", "expected a JSON object");
    only_keys(doc, "",
              {"name", "description", "window_seconds", "capture_filter", "devices", "features", "output"});

    CaptureConfig c;

    const json* name = field(doc, "name");
    if (!name) schema("/name", "missing required field");
    c.name = need_string(*name, "/name");
    if (!valid_config_name(c.name)) schema("/name", "name must match [A-Za-z0-9_-]{1,64}");

    if (auto f = field(doc, "description")) c.description = need_string(*f, "/description");

    const json* window = field(doc, "window_seconds");
    if (!window) schema("/window_seconds", "missing required field");
    if (!window->is_number()) schema("/window_seconds", "expected a number");
    c.window_seconds = window->get<double>();
    try {
        window_length_nanos(c.window_seconds);
    } catch (const WindowError& e) {
        throw ConfigError(ConfigError::kind::non_positive_window, "/window_seconds",
                          std::string("config /window_seconds: ") + e.what());
    }

    std::string filter_text;
    if (auto f = field(doc, "capture_filter")) filter_text = need_string(*f, "/capture_filter");
    try {
        c.filter = filter::parse_filter(filter_text);
    } catch (const filter::FilterError& e) {
        throw ConfigError(ConfigError::kind::invalid_filter, "/capture_filter",
                          std::string("config /capture_filter: ") + e.what(), e.offset());
    }
    c.capture_filter = filter::render_filter(c.filter);

    if (auto f = field(doc, "devices")) {
        if (!f->is_array()) schema("/devices", "expected an array");
        std::set<MacAddress> seen;
        for (std::size_t i = 0; i < f->size(); ++i) {
            const std::string path = "/devices/" + std::to_string(i);
            const json& d = (*f)[i];
            if (!d.is_object()) schema(path, "expected an object");
            only_keys(d, path, {"mac", "label"});
            const json* mac = field(d, "mac");
            if (!mac) schema(path + "/mac", "missing required field");
            auto text = need_string(*mac, path + "/mac");
            auto parsed = MacAddress::parse(text);
            if (!parsed)
                throw ConfigError(ConfigError::kind::invalid_mac, path + "/mac",
                                  "config " + path + "/mac: '" + text + "' is not a MAC address");
            if (!seen.insert(*parsed).second)
                throw ConfigError(ConfigError::kind::invalid_mac, path + "/mac",
                                  "config " + path + "/mac: duplicate device " + parsed->to_string());
            DeviceEntry entry{*parsed, std::nullopt};
            if (auto l = field(d, "label"); l && !l->is_null()) entry.label = need_string(*l, path + "/label");
            c.devices.push_back(std::move(entry));
        }
    }

    const json* feats = field(doc, "features");
    if (!feats) schema("/features", "missing required field");
    if (!feats->is_array()) schema("/features", "expected an array of strings");
    for (std::size_t i = 0; i < feats->size(); ++i)
        c.feature_patterns.push_back(need_string((*feats)[i], "/features/" + std::to_string(i)));
    if (c.feature_patterns.empty())
        throw ConfigError(ConfigError::kind::unknown_feature, "/features", "config /features: no features selected");
    try {
        c.selector = features::parse_selector(c.feature_patterns);
    } catch (const features::UnknownFeature& e) {
        std::string path = "/features";
        auto it = std::find(c.feature_patterns.begin(), c.feature_patterns.end(), e.patterns().front());
        path += "/" + std::to_string(it - c.feature_patterns.begin());
        throw ConfigError(ConfigError::kind::unknown_feature, path, std::string("config /features: ") + e.what());
    }

    if (auto f = field(doc, "output")) c.output = parse_output(*f);
    return c;
}

std::string serialize_config(const CaptureConfig& c)
{
    json doc = json::object();
    doc["name"] = c.name;
    doc["description"] = c.description;
    doc["window_seconds"] = c.window_seconds;
    doc["capture_filter"] = c.capture_filter;

    json devices = json::array();
    for (const auto& d : c.devices) {
        json entry = json::object();
        entry["mac"] = d.mac.to_string();
        entry["label"] = d.label ? json(*d.label) : json(nullptr);
        devices.push_back(std::move(entry));
    }
    doc["devices"] = std::move(devices);
    doc["features"] = c.feature_patterns;

    json out = json::object();
    out["include_header"] = c.output.include_header;
    out["per_device_files"] = c.output.per_device_files;
    out["timestamp_mode"] = c.output.timestamp_mode == TimestampMode::absolute ? "absolute" : "relative";
    out["include_label"] = c.output.include_label;
    out["emit_empty_windows"] = c.output.emit_empty_windows;
    doc["output"] = std::move(out);

    return doc.dump(2) + "\n";
}

ConfigStore::ConfigStore(fs::path directory) : dir_(std::move(directory))
{
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw StoreError(StoreError::kind::io_failure, "config store: cannot create " + dir_.string());
}

fs::path ConfigStore::path_for(const std::string& name) const
{
    if (!valid_config_name(name)) throw StoreError(StoreError::kind::not_found, "config store: invalid name");
    return dir_ / (name + ".json");
}

std::vector<std::string> ConfigStore::list() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir_, ec)) {
        const auto& p = entry.path();
        if (p.extension() == ".json" && valid_config_name(p.stem().string())) out.push_back(p.stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool ConfigStore::exists(const std::string& name) const
{
    if (!valid_config_name(name)) return false;
    std::lock_guard lock(mutex_);
    return fs::exists(path_for(name));
}

CaptureConfig ConfigStore::load(const std::string& name) const
{
    if (!valid_config_name(name)) throw StoreError(StoreError::kind::not_found, "config not found: " + name);
    std::lock_guard lock(mutex_);
    std::ifstream in(path_for(name), std::ios::binary);
    if (!in) throw StoreError(StoreError::kind::not_found, "config not found: " + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void ConfigStore::save(const CaptureConfig& config)
{
    const std::string text = serialize_config(config);
    std::lock_guard lock(mutex_);
    const fs::path target = path_for(config.name);
    const fs::path tmp = dir_ / ("." + config.name + ".json.tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) throw StoreError(StoreError::kind::io_failure, "config store: cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw StoreError(StoreError::kind::io_failure, "config store: cannot replace " + target.string());
    }
}

void ConfigStore::remove(const std::string& name)
{
    if (!valid_config_name(name)) throw StoreError(StoreError::kind::not_found, "config not found: " + name);
    std::lock_guard lock(mutex_);
    std::error_code ec;
    if (!fs::remove(path_for(name), ec)) {
        if (ec) throw StoreError(StoreError::kind::io_failure, "config store: cannot delete " + name);
        throw StoreError(StoreError::kind::not_found, "config not found: " + name);
    }
}

} // namespace iotfx::config
