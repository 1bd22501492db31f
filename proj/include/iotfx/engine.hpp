#pragma once

// Run lifecycle: source -> decode -> filter -> device projection -> windows
// (stage A) -> bounded queue -> features -> CSV (stage B).

#include "iotfx/bounded_queue.hpp"
#include "iotfx/config.hpp"
#include "iotfx/output.hpp"
#include "iotfx/pcap_io.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace iotfx::engine {

class EngineError : public std::runtime_error
{
public:
    enum class kind { already_running, not_running, source_unavailable, trace_unreadable, io_failure, config_invalid };
    EngineError(kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
    kind error_kind() const noexcept { return kind_; }

private:
    kind kind_;
};

std::string_view error_code(EngineError::kind k);

// ---------------------------------------------------------------------------
// Packet sources

enum class PollResult { frame, idle, end };

class PacketSource
{
public:
    virtual ~PacketSource() = default;
    virtual std::uint32_t link_type() const = 0;
    virtual bool live() const = 0;
    /// Waits at most `max_wait` for the next frame.
    virtual PollResult poll(pcap::RawFrame& out, std::chrono::milliseconds max_wait) = 0;
    /// Set when the stream ended on a truncated or corrupt record.
    virtual std::optional<std::string> warning() const { return std::nullopt; }
};

/// Replays a pcap file. With speed > 0 frames are released no faster than
/// their capture timestamps allow, scaled by speed (1 = real time).
std::unique_ptr<PacketSource> open_trace_source(const std::filesystem::path& path, double speed = 0);

/// Captures from a network interface (Linux AF_PACKET). Throws
/// EngineError(source_unavailable) for unknown interfaces or missing privilege.
std::unique_ptr<PacketSource> open_live_source(const std::string& interface_name);

struct SourceSpec
{
    enum class kind { pcap, live };
    kind type = kind::pcap;
    std::string location; // trace path or interface name
    double speed = 0;      // pcap only

    std::unique_ptr<PacketSource> open() const;
};

// ---------------------------------------------------------------------------
// Runs

enum class RunState : std::uint8_t { idle, running, stopping, finished, failed };
std::string_view to_string(RunState s);

struct RunStatus
{
    RunState state = RunState::idle;
    std::uint64_t packets_seen = 0;
    std::uint64_t packets_matched = 0;
    std::uint64_t packets_filtered = 0;
    std::uint64_t packets_undecodable = 0;
    std::uint64_t records_projected = 0; // one per (packet, monitored device)
    std::uint64_t records_windowed = 0;
    std::uint64_t late_drops = 0;
    std::uint64_t windows_queued = 0;
    std::uint64_t windows_emitted = 0;
    std::size_t queue_depth = 0;
    std::size_t queue_high_water = 0;
    std::size_t queue_capacity = 0;
    std::optional<Timestamp> started_at;
    std::optional<Timestamp> finished_at;
    std::optional<std::string> error;
    std::optional<std::string> warning;
};

struct OutputFile
{
    std::filesystem::path path;
    std::uintmax_t size = 0;
};

struct RunSummary
{
    RunStatus status;
    std::filesystem::path run_dir;
    std::vector<OutputFile> files;
};

struct RunOptions
{
    std::size_t queue_capacity = 1024;
    /// Capture-point MACs never treated as monitored devices.
    std::vector<MacAddress> own_macs;
    /// Behave as if stop were requested after this many frames (offline).
    std::optional<std::uint64_t> stop_after_frames;
};

class Run
{
public:
    Run(config::CaptureConfig config, std::unique_ptr<PacketSource> source, std::filesystem::path run_dir,
        RunOptions options = {});
    ~Run();

    Run(const Run&) = delete;
    Run& operator=(const Run&) = delete;

    /// Starts both stages in the background.
    void start();

    /// Graceful stop: open windows are flushed and the queue drained.
    /// Throws EngineError(not_running) unless the run is running.
    RunSummary stop();

    /// Blocks until the run ends on its own (end of trace) or is stopped.
    RunSummary wait();

    RunStatus status() const;
    bool active() const;

    const config::CaptureConfig& config() const { return config_; }
    const std::filesystem::path& run_dir() const { return run_dir_; }

private:
    struct Item;

    void capture_stage();
    void compute_stage();
    void fail(const std::string& message);
    RunSummary summary() const;

    config::CaptureConfig config_;
    std::unique_ptr<PacketSource> source_;
    std::filesystem::path run_dir_;
    RunOptions options_;
    std::unique_ptr<output::CsvSink> sink_;
    std::unique_ptr<BoundedQueue<Item>> queue_;

    std::atomic<RunState> state_{RunState::idle};
    std::atomic<bool> stop_requested_{false};

    std::atomic<std::uint64_t> packets_seen_{0}, packets_matched_{0}, packets_filtered_{0},
        packets_undecodable_{0}, records_projected_{0}, records_windowed_{0}, late_drops_{0}, windows_queued_{0},
        windows_emitted_{0};

    mutable std::mutex meta_mutex_;
    std::optional<Timestamp> started_at_, finished_at_;
    std::optional<std::string> error_;

    std::mutex join_mutex_;
    std::thread capture_thread_;
    std::thread compute_thread_;
};

/// Offline run to completion. Throws EngineError on unusable config, trace or output.
RunSummary run_offline(const config::CaptureConfig& config, const std::filesystem::path& trace,
                       const std::filesystem::path& run_dir, RunOptions options = {});

/// At most one active run per config name.
class RunRegistry
{
public:
    std::shared_ptr<Run> start(const config::CaptureConfig& config, const SourceSpec& source,
                               const std::filesystem::path& run_dir, RunOptions options = {});
    RunSummary stop(const std::string& name);
    /// Latest run for the name (active or not), if any.
    std::shared_ptr<Run> find(const std::string& name) const;
    bool active(const std::string& name) const;
    void forget(const std::string& name);
    std::vector<std::shared_ptr<Run>> runs() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Run>> runs_;
};

Timestamp wall_clock_now();

} // namespace iotfx::engine
