#pragma once

#include "iotfx/config.hpp"
#include "iotfx/windowing.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace iotfx::testing {

/// Directory removed on destruction.
class TempDir
{
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

/// Checked-in files (bundled config, fixture trace).
std::filesystem::path source_dir();
config::CaptureConfig load_bundled_camera_config();
std::filesystem::path bundled_fixture_trace();

/// Splits text into lines (no terminators); a trailing partial line is
/// reported through `partial_tail`.
std::vector<std::string> split_lines(const std::string& text, std::string* partial_tail = nullptr);

/// Unquoted CSV field split (good enough for files this project writes).
std::vector<std::string> split_csv(const std::string& line);

/// Every regular file in a gzip-compressed ustar archive, keyed by path.
std::map<std::string, std::string> read_tar_gz(const std::string& bytes);

/// Random window with 0..max_packets records spanning mixed transports,
/// directions, IP families and boundary frame sizes.
CompletedWindow random_window(std::mt19937_64& rng, std::size_t max_packets = 500);

/// All CSV rows of a run directory, in file-name order, headers removed.
std::vector<std::string> csv_rows(const std::filesystem::path& dir);

} // namespace iotfx::testing
