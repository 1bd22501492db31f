#include "iotfx/output.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace iotfx::output {

namespace fs = std::filesystem;

std::string format_value(double v)
{
    if (!std::isfinite(v)) return "0";
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%.9f", v);
    if (n <= 0 || static_cast<std::size_t>(n) >= sizeof buf) {
        // Beyond ~1e54 the fixed form does not fit; fall back to round-trip precision.
        n = std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf, static_cast<std::size_t>(n));
    }
    if (std::memchr(buf, '.', static_cast<std::size_t>(n))) {
        while (n > 0 && buf[n - 1] == '0') --n;
        if (n > 0 && buf[n - 1] == '.') --n;
    }
    std::string s(buf, static_cast<std::size_t>(n));
    if (s == "-0") s = "0";
    return s;
}

std::string csv_field(std::string_view text)
{
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string file_name_for(const std::string& config_name, const std::optional<MacAddress>& device)
{
    if (device) return config_name + "_" + device->to_file_token() + ".csv";
    return config_name + ".csv";
}

CsvSink::CsvSink(const config::CaptureConfig& config, fs::path run_dir)
    : name_(config.name), feature_names_(config.selector.names()), options_(config.output),
      run_dir_(std::move(run_dir))
{
    std::error_code ec;
    fs::create_directories(run_dir_, ec);
    if (ec) throw OutputError(OutputError::kind::io_failure, "output: cannot create " + run_dir_.string());

    std::lock_guard lock(mutex_);
    if (options_.per_device_files) {
        for (const auto& d : config.devices) file_for(d.mac);
    } else {
        shared_ = open_file(run_dir_ / file_name_for(name_, std::nullopt));
    }
}

CsvSink::~CsvSink()
{
    close();
}

std::string CsvSink::header_row() const
{
    std::string h = "window_ts";
    if (!options_.per_device_files) h += ",device_mac";
    if (options_.include_label) h += ",label";
    for (const auto& n : feature_names_) {
        h += ',';
        h += n;
    }
    return h;
}

std::FILE* CsvSink::open_file(const fs::path& path)
{
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw OutputError(OutputError::kind::io_failure, "output: cannot open " + path.string());
    paths_.push_back(path);
    if (options_.include_header) {
        const std::string h = header_row() + '\n';
        if (std::fwrite(h.data(), 1, h.size(), f) != h.size() || std::fflush(f) != 0)
            throw OutputError(OutputError::kind::io_failure, "output: cannot write " + path.string());
    }
    return f;
}

std::FILE* CsvSink::file_for(const MacAddress& mac)
{
    if (!options_.per_device_files) return shared_;
    auto it = per_device_.find(mac);
    if (it != per_device_.end()) return it->second;
    std::FILE* f = open_file(run_dir_ / file_name_for(name_, mac));
    per_device_.emplace(mac, f);
    return f;
}

void CsvSink::write_row(const features::FeatureVector& vector, const std::optional<std::string>& label)
{
    if (vector.values.size() != feature_names_.size())
        throw OutputError(OutputError::kind::length_mismatch, "output: feature vector length does not match header");

    std::lock_guard lock(mutex_);
    std::FILE* f = file_for(vector.device_mac);
    if (!f) throw OutputError(OutputError::kind::io_failure, "output: sink is closed");

    std::string& line = line_;
    line.clear();
    if (options_.timestamp_mode == config::TimestampMode::relative) {
        const Timestamp origin = origin_.value_or(vector.start_time);
        line += format_nanos(nanos_between(vector.start_time, origin));
    } else {
        line += format_timestamp(vector.start_time);
    }
    if (!options_.per_device_files) {
        line += ',';
        line += vector.device_mac.to_string();
    }
    if (options_.include_label) {
        line += ',';
        if (label) line += csv_field(*label);
    }
    for (double v : vector.values) {
        line += ',';
        line += format_value(v);
    }
    line += '\n';

    if (std::fwrite(line.data(), 1, line.size(), f) != line.size() || std::fflush(f) != 0)
        throw OutputError(OutputError::kind::io_failure, "output: write failed in " + run_dir_.string());
    ++rows_;
}

void CsvSink::close()
{
    std::lock_guard lock(mutex_);
    if (shared_) std::fclose(shared_);
    shared_ = nullptr;
    for (auto& [_, f] : per_device_)
        if (f) std::fclose(f);
    per_device_.clear();
}

std::uint64_t CsvSink::rows_written() const
{
    std::lock_guard lock(mutex_);
    return rows_;
}

std::vector<fs::path> CsvSink::files() const
{
    std::lock_guard lock(mutex_);
    return paths_;
}

namespace {

void octal_field(char* dst, std::size_t width, std::uint64_t value)
{
    // width includes the trailing NUL
    std::snprintf(dst, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

void append_tar_entry(std::vector<std::uint8_t>& tar, const std::string& name, const std::string& data,
                      std::int64_t mtime)
{
    char header[512];
    std::memset(header, 0, sizeof header);

    std::string prefix, base = name;
    if (name.size() > 100) {
        auto slash = name.rfind('/', 155);
        if (slash == std::string::npos || name.size() - slash - 1 > 100)
            throw OutputError(OutputError::kind::io_failure, "archive: path too long: " + name);
        prefix = name.substr(0, slash);
        base = name.substr(slash + 1);
    }
    std::memcpy(header, base.data(), base.size());
    octal_field(header + 100, 8, 0644);
    octal_field(header + 108, 8, 0);
    octal_field(header + 116, 8, 0);
    octal_field(header + 124, 12, data.size());
    octal_field(header + 136, 12, static_cast<std::uint64_t>(std::max<std::int64_t>(mtime, 0)));
    header[156] = '0';
    std::memcpy(header + 257, "ustar", 6);
    std::memcpy(header + 263, "00", 2);
    std::memcpy(header + 345, prefix.data(), prefix.size());

    std::memset(header + 148, ' ', 8);
    unsigned sum = 0;
    for (unsigned char c : header) sum += c;
    std::snprintf(header + 148, 8, "%06o", sum);
    header[155] = ' ';

    tar.insert(tar.end(), header, header + 512);
    tar.insert(tar.end(), data.begin(), data.end());
    tar.resize(tar.size() + (512 - data.size() % 512) % 512, 0);
}

std::vector<std::uint8_t> gzip(const std::vector<std::uint8_t>& input)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw OutputError(OutputError::kind::io_failure, "archive: deflateInit2 failed");

    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(input.size())) + 32);
    zs.next_in = const_cast<Bytef*>(input.data());
    zs.avail_in = static_cast<uInt>(input.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw OutputError(OutputError::kind::io_failure, "archive: deflate failed");
    return out;
}

} // namespace

std::vector<std::uint8_t> package_archive(const fs::path& run_dir)
{
    std::error_code ec;
    if (!fs::is_directory(run_dir, ec))
        throw OutputError(OutputError::kind::io_failure, "archive: no such run directory " + run_dir.string());

    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(run_dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        if (it->is_regular_file()) files.push_back(it->path());
    }
    if (ec) throw OutputError(OutputError::kind::io_failure, "archive: cannot list " + run_dir.string());
    std::sort(files.begin(), files.end());

    std::vector<std::uint8_t> tar;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw OutputError(OutputError::kind::io_failure, "archive: cannot read " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string data = ss.str();
        if (path.extension() == ".csv") {
            auto last = data.rfind('\n');
            data.resize(last == std::string::npos ? 0 : last + 1);
        }
        // file_clock's epoch is not the Unix epoch.
        auto sys = std::chrono::file_clock::to_sys(fs::last_write_time(path, ec));
        auto mtime = std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count();
        append_tar_entry(tar, fs::relative(path, run_dir).generic_string(), data, mtime);
    }
    tar.resize(tar.size() + 1024, 0); // two zero blocks end the archive
    return gzip(tar);
}

} // namespace iotfx::output
