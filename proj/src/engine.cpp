#include "iotfx/engine.hpp"

#include "iotfx/packet_decode.hpp"
#include "iotfx/windowing.hpp"

#include <algorithm>
#include <set>

namespace iotfx::engine {

namespace fs = std::filesystem;

std::string_view error_code(EngineError::kind k)
{
    switch (k) {
    case EngineError::kind::already_running:
        return "already_running";
    case EngineError::kind::not_running:
        return "not_running";
    case EngineError::kind::source_unavailable:
        return "source_unavailable";
    case EngineError::kind::trace_unreadable:
        return "trace_unreadable";
    case EngineError::kind::io_failure:
        return "io_failure";
    case EngineError::kind::config_invalid:
        return "config_invalid";
    }
    return "internal";
}

std::string_view to_string(RunState s)
{
    switch (s) {
    case RunState::idle:
        return "idle";
    case RunState::running:
        return "running";
    case RunState::stopping:
        return "stopping";
    case RunState::finished:
        return "finished";
    case RunState::failed:
        return "failed";
    }
    return "idle";
}

struct Run::Item
{
    CompletedWindow window;
    Timestamp origin;
};

Run::Run(config::CaptureConfig config, std::unique_ptr<PacketSource> source, fs::path run_dir, RunOptions options)
    : config_(std::move(config)), source_(std::move(source)), run_dir_(std::move(run_dir)),
      options_(std::move(options))
{
    if (config_.selector.empty())
        throw EngineError(EngineError::kind::config_invalid, "config selects no features");
    try {
        sink_ = std::make_unique<output::CsvSink>(config_, run_dir_);
    } catch (const output::OutputError& e) {
        throw EngineError(EngineError::kind::io_failure, e.what());
    }
    queue_ = std::make_unique<BoundedQueue<Item>>(options_.queue_capacity);
}

Run::~Run()
{
    stop_requested_ = true;
    if (queue_) queue_->close();
    if (capture_thread_.joinable()) capture_thread_.join();
    if (compute_thread_.joinable()) compute_thread_.join();
}

void Run::start()
{
    RunState expected = RunState::idle;
    if (!state_.compare_exchange_strong(expected, RunState::running, std::memory_order_acq_rel))
        throw EngineError(EngineError::kind::already_running, "run already started");
    {
        std::lock_guard lock(meta_mutex_);
        started_at_ = wall_clock_now();
    }
    compute_thread_ = std::thread([this] { compute_stage(); });
    capture_thread_ = std::thread([this] { capture_stage(); });
}

void Run::capture_stage()
{
    const bool live = source_->live();
    const bool lazy_devices = config_.devices.empty();
    std::set<MacAddress> monitored;
    for (const auto& d : config_.devices) monitored.insert(d.mac);
    const std::set<MacAddress> own(options_.own_macs.begin(), options_.own_macs.end());

    std::optional<WindowAssembler> assembler;
    auto make_assembler = [&](Timestamp origin) {
        assembler.emplace(config_.window_seconds, origin);
        if (config_.output.emit_empty_windows && !config_.devices.empty())
            assembler->set_empty_window_devices({monitored.begin(), monitored.end()});
    };
    if (live) make_assembler(wall_clock_now());

    auto sync_late = [&] {
        if (assembler) late_drops_.store(assembler->late_drop_count(), std::memory_order_release);
    };

    // Items carry the origin so stage B can render relative timestamps.
    auto push = [&](std::vector<CompletedWindow> ws) {
        for (auto& w : ws) {
            records_windowed_.fetch_add(w.packets.size(), std::memory_order_release);
            if (!queue_->push(Item{std::move(w), assembler->origin()})) return false;
            windows_queued_.fetch_add(1, std::memory_order_release);
        }
        return true;
    };

    pcap::RawFrame frame;
    std::vector<PacketRecord> records;
    bool open = true;
    std::uint64_t frames = 0;

    while (open) {
        if (stop_requested_.load(std::memory_order_acquire)) break;
        if (options_.stop_after_frames && frames >= *options_.stop_after_frames) break;

        auto wait = std::chrono::milliseconds(100);
        if (live && assembler) {
            // Wake at the next window boundary so idle windows still close on time.
            const auto now = wall_clock_now();
            const std::int64_t w = assembler->window_ns();
            const std::int64_t elapsed = std::max<std::int64_t>(nanos_between(now, assembler->origin()), 0);
            const std::int64_t to_boundary = w - elapsed % w;
            wait = std::min(wait, std::chrono::milliseconds(to_boundary / 1'000'000 + 1));
        }

        PollResult r;
        try {
            r = source_->poll(frame, wait);
        } catch (const std::exception& e) {
            fail(std::string("source failed: ") + e.what());
            break;
        }

        if (live && assembler) {
            const auto now = wall_clock_now();
            if (now >= assembler->origin()) {
                const std::int64_t idx = nanos_between(now, assembler->origin()) / assembler->window_ns();
                open = push(assembler->advance_to(idx));
            }
        }
        if (r == PollResult::end) break;
        if (r == PollResult::idle) continue;

        ++frames;
        packets_seen_.fetch_add(1, std::memory_order_release);

        auto decoded = decode_frame(frame, source_->link_type());
        if (std::holds_alternative<Undecodable>(decoded)) {
            packets_undecodable_.fetch_add(1, std::memory_order_release);
            continue;
        }
        const auto& pkt = std::get<DecodedPacket>(decoded);
        if (!filter::eval_filter(config_.filter, pkt)) {
            packets_filtered_.fetch_add(1, std::memory_order_release);
            continue;
        }
        packets_matched_.fetch_add(1, std::memory_order_release);

        if (!pkt.src_mac || !pkt.dst_mac) continue;
        if (lazy_devices && !pkt.src_mac->is_group() && !own.contains(*pkt.src_mac))
            monitored.insert(*pkt.src_mac);

        records.clear();
        if (monitored.contains(*pkt.src_mac))
            if (auto rec = project_for_device(pkt, *pkt.src_mac)) records.push_back(*rec);
        if (*pkt.dst_mac != *pkt.src_mac && monitored.contains(*pkt.dst_mac))
            if (auto rec = project_for_device(pkt, *pkt.dst_mac)) records.push_back(*rec);
        if (records.empty()) continue;

        if (!assembler) make_assembler(pkt.timestamp);
        records_projected_.fetch_add(records.size(), std::memory_order_release);
        for (const auto& rec : records) {
            if (!push(assembler->ingest(rec))) {
                open = false;
                break;
            }
        }
        sync_late();
    }

    if (assembler && open) push(assembler->flush_all());
    sync_late();
    queue_->close();
}

void Run::compute_stage()
{
    bool origin_set = false;
    while (auto item = queue_->pop()) {
        if (state_.load(std::memory_order_acquire) == RunState::failed) continue;
        try {
            if (!origin_set) {
                sink_->set_origin(item->origin);
                origin_set = true;
            }
            auto fv = features::compute_feature_vector(item->window, config_.selector);
            sink_->write_row(fv, config_.label_for(item->window.key.device_mac));
            windows_emitted_.fetch_add(1, std::memory_order_release);
        } catch (const std::exception& e) {
            fail(std::string("output failed: ") + e.what());
            stop_requested_ = true;
            queue_->close();
        }
    }

    sink_->close();
    {
        std::lock_guard lock(meta_mutex_);
        finished_at_ = wall_clock_now();
    }
    RunState s = RunState::running;
    if (!state_.compare_exchange_strong(s, RunState::finished, std::memory_order_acq_rel) && s == RunState::stopping)
        state_.compare_exchange_strong(s, RunState::finished, std::memory_order_acq_rel);
}

void Run::fail(const std::string& message)
{
    {
        std::lock_guard lock(meta_mutex_);
        if (!error_) error_ = message;
    }
    state_.store(RunState::failed, std::memory_order_release);
}

RunSummary Run::wait()
{
    {
        std::lock_guard lock(join_mutex_);
        if (capture_thread_.joinable()) capture_thread_.join();
        if (compute_thread_.joinable()) compute_thread_.join();
    }
    return summary();
}

RunSummary Run::stop()
{
    RunState expected = RunState::running;
    if (!state_.compare_exchange_strong(expected, RunState::stopping, std::memory_order_acq_rel))
        throw EngineError(EngineError::kind::not_running, "run is not running");
    stop_requested_.store(true, std::memory_order_release);
    return wait();
}

bool Run::active() const
{
    auto s = state_.load(std::memory_order_acquire);
    return s == RunState::running || s == RunState::stopping;
}

RunStatus Run::status() const
{
    RunStatus st;
    st.state = state_.load(std::memory_order_acquire);
    {
        std::lock_guard lock(meta_mutex_);
        st.started_at = started_at_;
        st.finished_at = finished_at_;
        st.error = error_;
    }
    st.packets_seen = packets_seen_.load(std::memory_order_acquire);
    st.packets_matched = packets_matched_.load(std::memory_order_acquire);
    st.packets_filtered = packets_filtered_.load(std::memory_order_acquire);
    st.packets_undecodable = packets_undecodable_.load(std::memory_order_acquire);
    st.records_projected = records_projected_.load(std::memory_order_acquire);
    st.records_windowed = records_windowed_.load(std::memory_order_acquire);
    st.late_drops = late_drops_.load(std::memory_order_acquire);
    st.windows_queued = windows_queued_.load(std::memory_order_acquire);
    st.windows_emitted = windows_emitted_.load(std::memory_order_acquire);
    st.queue_depth = queue_->size();
    st.queue_high_water = queue_->high_water();
    st.queue_capacity = queue_->capacity();
    st.warning = source_->warning();
    return st;
}

RunSummary Run::summary() const
{
    RunSummary s;
    s.status = status();
    s.run_dir = run_dir_;
    for (const auto& p : sink_->files()) {
        std::error_code ec;
        auto size = fs::file_size(p, ec);
        s.files.push_back({p, ec ? 0 : size});
    }
    return s;
}

RunSummary run_offline(const config::CaptureConfig& config, const fs::path& trace, const fs::path& run_dir,
                       RunOptions options)
{
    Run run(config, open_trace_source(trace), run_dir, std::move(options));
    run.start();
    return run.wait();
}

std::shared_ptr<Run> RunRegistry::start(const config::CaptureConfig& config, const SourceSpec& source,
                                        const fs::path& run_dir, RunOptions options)
{
    std::lock_guard lock(mutex_);
    auto it = runs_.find(config.name);
    if (it != runs_.end() && it->second->active())
        throw EngineError(EngineError::kind::already_running, "config '" + config.name + "' is already running");
    auto run = std::make_shared<Run>(config, source.open(), run_dir, std::move(options));
    run->start();
    runs_[config.name] = run;
    return run;
}

RunSummary RunRegistry::stop(const std::string& name)
{
    std::shared_ptr<Run> run = find(name);
    if (!run) throw EngineError(EngineError::kind::not_running, "config '" + name + "' is not running");
    return run->stop();
}

std::shared_ptr<Run> RunRegistry::find(const std::string& name) const
{
    std::lock_guard lock(mutex_);
    auto it = runs_.find(name);
    return it == runs_.end() ? nullptr : it->second;
}

bool RunRegistry::active(const std::string& name) const
{
    auto run = find(name);
    return run && run->active();
}

void RunRegistry::forget(const std::string& name)
{
    std::lock_guard lock(mutex_);
    runs_.erase(name);
}

std::vector<std::shared_ptr<Run>> RunRegistry::runs() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Run>> out;
    for (const auto& [_, r] : runs_) out.push_back(r);
    return out;
}

} // namespace iotfx::engine
