#pragma once

#include "iotfx/features.hpp"
#include "iotfx/filter.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iotfx::config {

struct DeviceEntry
{
    MacAddress mac;
    std::optional<std::string> label;

    friend bool operator==(const DeviceEntry&, const DeviceEntry&) = default;
};

enum class TimestampMode : std::uint8_t { absolute, relative };

struct OutputOptions
{
    bool include_header = true;
    bool per_device_files = false;
    TimestampMode timestamp_mode = TimestampMode::absolute;
    bool include_label = true;
    bool emit_empty_windows = false;

    friend bool operator==(const OutputOptions&, const OutputOptions&) = default;
};

struct CaptureConfig
{
    std::string name;
    std::string description;
    double window_seconds = 0;
    std::string capture_filter; // canonical rendering of `filter`
    filter::FilterExpr filter;
    std::vector<DeviceEntry> devices; // empty: every observed device
    std::vector<std::string> feature_patterns;
    features::FeatureSelector selector;
    OutputOptions output;

    /// Label configured for a device, if any.
    std::optional<std::string> label_for(const MacAddress& mac) const;

    friend bool operator==(const CaptureConfig&, const CaptureConfig&) = default;
};

class ConfigError : public std::invalid_argument
{
public:
    enum class kind { schema_error, invalid_mac, invalid_filter, unknown_feature, non_positive_window };

    ConfigError(kind k, std::string path, const std::string& what, std::optional<std::size_t> offset = {})
        : std::invalid_argument(what), kind_(k), path_(std::move(path)), offset_(offset)
    {
    }

    kind error_kind() const noexcept { return kind_; }
    /// JSON-pointer-like location of the offending value, e.g. "/devices/2/mac".
    const std::string& path() const noexcept { return path_; }
    /// Byte offset inside the filter text, for invalid_filter.
    std::optional<std::size_t> offset() const noexcept { return offset_; }

private:
    kind kind_;
    std::string path_;
    std::optional<std::size_t> offset_;
};

std::string_view error_code(ConfigError::kind k);

bool valid_config_name(std::string_view name);

/// Parses and fully validates a JSON config document. Throws ConfigError.
CaptureConfig parse_config(std::string_view document);

/// Canonical JSON: sorted keys, explicit defaults, two-space indent.
std::string serialize_config(const CaptureConfig& config);

class StoreError : public std::runtime_error
{
public:
    enum class kind { not_found, io_failure };
    StoreError(kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
    kind error_kind() const noexcept { return kind_; }

private:
    kind kind_;
};

/// One <name>.json per config in a directory. Saves replace files atomically.
class ConfigStore
{
public:
    explicit ConfigStore(std::filesystem::path directory);

    std::vector<std::string> list() const;
    bool exists(const std::string& name) const;
    CaptureConfig load(const std::string& name) const;
    void save(const CaptureConfig& config);
    void remove(const std::string& name);

    const std::filesystem::path& directory() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& name) const;

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

} // namespace iotfx::config
