// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "sigsim/sim.hpp"
#include "sigsim/trace.hpp"

namespace sigsim {

enum class OrderingMode : std::uint8_t { ProxyFence, NicFence };
enum class QpPolicy : std::uint8_t { RoundRobin, PeerHash };
enum class TransportPath : std::uint8_t { Proxy, GpuDirect };

const char* to_string(OrderingMode m);
const char* to_string(QpPolicy p);
const char* to_string(TransportPath t);

/// One proxy/NIC submission unit: a data Put, a flag-word Signal, or a
/// proxy-level FenceMarker. FenceMarkers never reach the NIC and never carry
/// fence_flag; the flag is the NIC-side ordering bit set on a Signal.
struct WorkRequest {
    ReqKind kind = ReqKind::Put;
    std::uint32_t src_pe = 0;
    std::uint32_t dst_pe = 0;
    std::uint64_t size = 0;  // Put: payload bytes; Signal: flag word; Fence: 0
    bool fence_flag = false;
    std::int64_t group_id = -1;
    std::int64_t tile_id = -1;  // links a Signal to the Put it announces
    std::uint64_t submit_seq = 0;
    std::uint64_t flag_id = 0;      // Signal: destination flag word
    std::uint64_t heap_offset = 0;  // Put: destination extent
};

/// Timing parameters of the modeled fabric. The per-request completion
/// latency observed by the proxy is
///     transfer_completion_time = queue_wait + size/bandwidth
///                              + base_rtt * (1 + completion_tail_coeff * D)
/// where D is the sender's destination fan-out (distinct remote PEs with
/// outstanding Puts on the channel, minus one). The payload itself lands at
/// queue_wait + size/bandwidth + base_rtt; the tail term models the lag until
/// the sender-side completion counter reflects it, which is what fence drains
/// poll on.
struct LatencyModel {
    TimeNs base_rtt_ns = 400;
    double bandwidth_bytes_per_ns = 25.0;
    double completion_tail_coeff = 1.0;
    TimeNs per_request_nic_service_ns = 100;
    TimeNs proxy_poll_quantum_ns = 500;
    TimeNs issue_cost_ns = 200;
    TimeNs issue_jitter_ns = 0;
    TimeNs gpu_direct_issue_cost_ns = 400;
    TimeNs nvlink_latency_ns = 700;
    std::uint64_t signal_bytes = 8;
    int processors_per_pe = 8;
    double slot_tflops = 200.0;

    void validate() const;

    TimeNs wire_ns(std::uint64_t size) const {
        return static_cast<TimeNs>(static_cast<double>(size) / bandwidth_bytes_per_ns);
    }
    TimeNs tail_ns(int fanout) const {
        return static_cast<TimeNs>(static_cast<double>(base_rtt_ns) * completion_tail_coeff *
                                   static_cast<double>(fanout));
    }
    // Latency from service start to the completion notification the proxy
    // observes. fanout = D as defined above.
    TimeNs transfer_completion_time(std::uint64_t size, int fanout, TimeNs queue_wait_ns = 0) const {
        return queue_wait_ns + wire_ns(size) + base_rtt_ns + tail_ns(fanout);
    }
    TimeNs compute_ns(std::uint64_t bytes, double intensity_tflops_per_gb) const {
        if (intensity_tflops_per_gb <= 0.0 || slot_tflops <= 0.0) return 0;
        return static_cast<TimeNs>(static_cast<double>(bytes) * intensity_tflops_per_gb / slot_tflops);
    }
};

/// The single per-PE host FIFO the proxy drains, plus outstanding-completion
/// bookkeeping and drain statistics.
struct ProxyChannel {
    std::uint32_t pe = 0;
    std::deque<WorkRequest> fifo;
    std::uint64_t next_submit_seq = 1;
    std::int64_t outstanding = 0;  // NIC-submitted, completion not yet observed
    bool pending_fence = false;    // set by NicFence mode
    bool blocked = false;
    bool drain_pending = false;
    TimeNs block_began = 0;
    std::uint32_t rr_next = 0;

    // destination fan-out watermark for the current busy epoch: distinct
    // remote PEs with Puts still outstanding (queued or in flight) from this
    // channel; resets when the put backlog fully drains
    std::int64_t put_backlog = 0;
    std::set<std::uint32_t> epoch_dests;

    TimeNs proxy_blocked_total = 0;
    std::vector<TimeNs> per_fence_drain;
    std::int64_t blocking_episodes = 0;

    int fanout() const {
        return epoch_dests.empty() ? 0 : static_cast<int>(epoch_dests.size()) - 1;
    }
};

/// A per-(PE pair, QP) reliable-connection pipeline. Requests begin service in
/// submission order and deliver in order at the receiver; a fence_flag request
/// defers service until every earlier request on the same connection has
/// completed. No ordering exists across distinct connections.
struct NicConnection {
    std::uint32_t src_pe = 0;
    std::uint32_t dst_pe = 0;
    int qp = 0;
    std::deque<WorkRequest> pipeline;  // submitted, service not yet begun
    std::int64_t in_flight = 0;        // in service, data not yet delivered
    bool blocked_head = false;
    TimeNs wire_free = 0;      // connection pipe busy-until
    TimeNs last_delivery = 0;  // in-order delivery clamp
    std::int64_t nic_stall_episodes = 0;
    TimeNs nic_stall_total = 0;
    TimeNs stall_began = 0;
};

/// PGAS state: per-PE extents written by Puts and signal flag words.
struct SymmetricHeap {
    struct Extent {
        std::uint32_t pe;
        std::uint64_t offset;
        std::uint64_t length;
        TimeNs written_at;
    };
    std::vector<Extent> extents;
    std::map<std::uint64_t, TimeNs> flags;  // flag id -> visible time
    std::map<std::uint64_t, int> flag_set_count;

    void write_extent(std::uint32_t pe, std::uint64_t offset, std::uint64_t length, TimeNs t) {
        extents.push_back({pe, offset, length, t});
    }
    // One-shot per dispatch; re-delivery with an earlier time is a model error.
    void set_flag(std::uint64_t flag, TimeNs t) {
        auto it = flags.find(flag);
        if (it != flags.end() && t < it->second) {
            throw ModelError("deliver_signal: flag " + std::to_string(flag) +
                             " re-set with earlier time");
        }
        flags[flag] = t;
        flag_set_count[flag] += 1;
    }
    // Timing-free digest of final contents: which extents and which flags.
    std::uint64_t digest() const;
};

int select_qp(QpPolicy policy, std::uint32_t peer, int num_qps, ProxyChannel& channel);

/// Submission-path engine: proxy FIFOs, NIC connections, the per-connection
/// wire, and the symmetric heap. Owns no protocol logic; protocols feed it
/// WorkRequests and observe trace records and signal callbacks.
class TransportEngine {
  public:
    struct Options {
        OrderingMode ordering = OrderingMode::ProxyFence;
        QpPolicy qp_policy = QpPolicy::PeerHash;
        TransportPath path = TransportPath::Proxy;
        int num_qps = 1;
        bool fence_waits_all = true;  // proxy fence waits on Signals too
        bool suppress_fences = false; // fault-injection hook for checker tests
    };

    TransportEngine(SimEngine& sim, const LatencyModel& lat, Options opt, std::uint32_t num_pes,
                    RunTrace& trace);

    // Appends to the channel FIFO (or hands straight to the NIC on the
    // GPU-direct path) and returns the per-channel submit sequence.
    std::uint64_t submit(const WorkRequest& req);
    // Same, but rejects a request submitted through a channel its source PE
    // does not own.
    std::uint64_t submit(std::uint32_t channel_pe, const WorkRequest& req);

    // Intra-node transfer: payload and optional flag visible after a fixed
    // NVLink latency, no proxy or NIC involvement.
    void local_put(const WorkRequest& put, bool with_signal);

    void deliver_signal(std::uint64_t flag, std::uint32_t src_pe, std::uint32_t dst_pe, TimeNs t,
                        std::int64_t tile_id);

    ProxyChannel& channel(std::uint32_t pe) { return channels_.at(pe); }
    const ProxyChannel& channel(std::uint32_t pe) const { return channels_.at(pe); }
    SymmetricHeap& heap() { return heap_; }
    const SymmetricHeap& heap() const { return heap_; }
    const LatencyModel& latency() const { return lat_; }
    const Options& options() const { return opt_; }

    std::function<void(std::int64_t tile_id, std::uint32_t dst_pe, TimeNs t)> on_signal_visible;

    std::uint64_t puts_submitted = 0;
    std::uint64_t puts_completed = 0;

  private:
    friend struct TransportTestAccess;

    struct ConnKey {
        std::uint32_t src, dst;
        int qp;
        bool operator<(const ConnKey& o) const {
            if (src != o.src) return src < o.src;
            if (dst != o.dst) return dst < o.dst;
            return qp < o.qp;
        }
    };

    void note_put_enqueued(ProxyChannel& ch, const WorkRequest& req);
    void request_drain(std::uint32_t pe);
    void drain(std::uint32_t pe);
    void schedule_fence_poll(std::uint32_t pe);
    void nic_submit(NicConnection& conn, WorkRequest req);
    void conn_advance(NicConnection& conn);
    void begin_service(NicConnection& conn, WorkRequest req);
    void complete_data(NicConnection& conn, const WorkRequest& req, TimeNs data_time);
    NicConnection& connection(std::uint32_t src, std::uint32_t dst, int qp);
    void record(TraceKind kind, std::uint32_t pe, const WorkRequest& req, TimeNs t, int qp = -1);

    SimEngine& sim_;
    LatencyModel lat_;
    Options opt_;
    RunTrace& trace_;
    std::vector<ProxyChannel> channels_;
    std::map<ConnKey, NicConnection> conns_;
    SymmetricHeap heap_;
};

}  // namespace sigsim
