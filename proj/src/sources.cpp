#include "iotfx/engine.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <linux/if_ether.h>
#include <linux/if_packet.h>
#include <net/if.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace iotfx::engine {

Timestamp wall_clock_now()
{
    auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
    return Timestamp::from_nanos(ns);
}

namespace {

class TraceSource final : public PacketSource
{
public:
    TraceSource(const std::filesystem::path& path, double speed) : in_(path, std::ios::binary), speed_(speed)
    {
        if (!in_)
            throw EngineError(EngineError::kind::source_unavailable, "cannot open trace " + path.string());
        try {
            reader_.emplace(in_);
        } catch (const pcap::TraceError& e) {
            throw EngineError(EngineError::kind::trace_unreadable, path.string() + ": " + e.what());
        }
    }

    std::uint32_t link_type() const override { return reader_->header().link_type; }
    bool live() const override { return false; }

    PollResult poll(pcap::RawFrame& out, std::chrono::milliseconds max_wait) override
    {
        if (!pending_) {
            try {
                pending_ = reader_->next_frame();
            } catch (const pcap::TraceError& e) {
                warning_ = e.what();
                pending_.reset();
            }
            if (!pending_) return PollResult::end;
        }
        if (speed_ > 0) {
            auto now = std::chrono::steady_clock::now();
            if (!replay_start_) {
                replay_start_ = now;
                first_ts_ = pending_->timestamp;
            }
            auto offset_ns = static_cast<std::int64_t>(
                static_cast<double>(nanos_between(pending_->timestamp, first_ts_)) / speed_);
            auto due = *replay_start_ + std::chrono::nanoseconds(std::max<std::int64_t>(offset_ns, 0));
            if (due > now) {
                auto wait = std::min<std::chrono::steady_clock::duration>(due - now, max_wait);
                std::this_thread::sleep_for(wait);
                if (std::chrono::steady_clock::now() < due) return PollResult::idle;
            }
        }
        out = std::move(*pending_);
        pending_.reset();
        return PollResult::frame;
    }

    std::optional<std::string> warning() const override { return warning_; }

private:
    std::ifstream in_;
    std::optional<pcap::TraceReader> reader_;
    std::optional<pcap::RawFrame> pending_;
    std::optional<std::string> warning_;
    double speed_;
    std::optional<std::chrono::steady_clock::time_point> replay_start_;
    Timestamp first_ts_;
};

class LiveSource final : public PacketSource
{
public:
    explicit LiveSource(const std::string& name) : buffer_(65536)
    {
        const unsigned index = ::if_nametoindex(name.c_str());
        if (index == 0) throw EngineError(EngineError::kind::source_unavailable, "no such interface: " + name);

        fd_ = ::socket(AF_PACKET, SOCK_RAW, htons(ETH_P_ALL));
        if (fd_ < 0)
            throw EngineError(EngineError::kind::source_unavailable,
                              "cannot capture on " + name + ": " + std::strerror(errno));

        sockaddr_ll addr{};
        addr.sll_family = AF_PACKET;
        addr.sll_protocol = htons(ETH_P_ALL);
        addr.sll_ifindex = static_cast<int>(index);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            int err = errno;
            ::close(fd_);
            throw EngineError(EngineError::kind::source_unavailable,
                              "cannot bind to " + name + ": " + std::strerror(err));
        }
    }

    ~LiveSource() override
    {
        if (fd_ >= 0) ::close(fd_);
    }

    std::uint32_t link_type() const override { return pcap::linktype_ethernet; }
    bool live() const override { return true; }

    PollResult poll(pcap::RawFrame& out, std::chrono::milliseconds max_wait) override
    {
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, static_cast<int>(std::max<std::int64_t>(max_wait.count(), 0)));
        if (rc == 0 || (rc < 0 && errno == EINTR)) return PollResult::idle;
        if (rc < 0 || (pfd.revents & (POLLERR | POLLNVAL))) return PollResult::end;

        ssize_t n = ::recv(fd_, buffer_.data(), buffer_.size(), MSG_TRUNC);
        if (n < 0) return errno == EINTR || errno == EAGAIN ? PollResult::idle : PollResult::end;

        const auto captured = std::min<std::size_t>(static_cast<std::size_t>(n), buffer_.size());
        out.timestamp = wall_clock_now();
        out.original_len = static_cast<std::uint32_t>(n);
        out.captured_len = static_cast<std::uint32_t>(captured);
        out.data.assign(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(captured));
        return PollResult::frame;
    }

private:
    int fd_ = -1;
    std::vector<std::uint8_t> buffer_;
};

} // namespace

std::unique_ptr<PacketSource> open_trace_source(const std::filesystem::path& path, double speed)
{
    return std::make_unique<TraceSource>(path, speed);
}

std::unique_ptr<PacketSource> open_live_source(const std::string& interface_name)
{
    return std::make_unique<LiveSource>(interface_name);
}

std::unique_ptr<PacketSource> SourceSpec::open() const
{
    if (type == kind::live) return open_live_source(location);
    return open_trace_source(location, speed);
}

} // namespace iotfx::engine
