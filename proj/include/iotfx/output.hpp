#pragma once

#include "iotfx/config.hpp"
#include "iotfx/features.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iotfx::output {

class OutputError : public std::runtime_error
{
public:
    enum class kind { io_failure, length_mismatch };
    OutputError(kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
    kind error_kind() const noexcept { return kind_; }

private:
    kind kind_;
};

/// Feature value as CSV text: fixed notation, at most 9 fractional digits,
/// trailing zeros trimmed, never "-0".
std::string format_value(double v);

/// Quotes a field only if it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view text);

/// CSV evidence files of one run. Every row is written and flushed whole.
class CsvSink
{
public:
    /// Creates run_dir and, for known devices or single-file mode, the files
    /// with their header rows.
    CsvSink(const config::CaptureConfig& config, std::filesystem::path run_dir);
    ~CsvSink();

    CsvSink(const CsvSink&) = delete;
    CsvSink& operator=(const CsvSink&) = delete;

    /// Origin for relative timestamps.
    void set_origin(Timestamp t0) { origin_ = t0; }

    void write_row(const features::FeatureVector& vector, const std::optional<std::string>& label);
    void close();

    std::uint64_t rows_written() const;
    std::vector<std::filesystem::path> files() const;
    const std::filesystem::path& run_dir() const { return run_dir_; }

    std::string header_row() const;

private:
    std::FILE* file_for(const MacAddress& mac);
    std::FILE* open_file(const std::filesystem::path& path);

    std::string name_;
    std::vector<std::string> feature_names_;
    config::OutputOptions options_;
    std::filesystem::path run_dir_;
    std::optional<Timestamp> origin_;

    mutable std::mutex mutex_;
    std::FILE* shared_ = nullptr;
    std::map<MacAddress, std::FILE*> per_device_;
    std::vector<std::filesystem::path> paths_;
    std::uint64_t rows_ = 0;
    std::string line_;
};

std::string file_name_for(const std::string& config_name, const std::optional<MacAddress>& device);

/// gzip-compressed POSIX tar of every regular file under run_dir (paths
/// relative to it). CSV files are cut at their last complete row, so an
/// archive taken while rows are being appended never holds a partial row.
std::vector<std::uint8_t> package_archive(const std::filesystem::path& run_dir);

} // namespace iotfx::output
