// SPDX-License-Identifier: Apache-2.0
#include "sigsim/transport.hpp"

#include <algorithm>
#include <string>

namespace sigsim {

const char* to_string(OrderingMode m) {
    return m == OrderingMode::ProxyFence ? "proxy_fence" : "nic_fence";
}
const char* to_string(QpPolicy p) { return p == QpPolicy::RoundRobin ? "round_robin" : "peer_hash"; }
const char* to_string(TransportPath t) { return t == TransportPath::Proxy ? "proxy" : "gpu_direct"; }

void LatencyModel::validate() const {
    if (base_rtt_ns < 0 || per_request_nic_service_ns < 0 || issue_cost_ns < 0 ||
        issue_jitter_ns < 0 || gpu_direct_issue_cost_ns < 0 || nvlink_latency_ns < 0) {
        throw ConfigError("latency model: negative time parameter");
    }
    if (bandwidth_bytes_per_ns <= 0.0) throw ConfigError("latency model: bandwidth must be > 0");
    if (completion_tail_coeff < 0.0) throw ConfigError("latency model: tail coefficient must be >= 0");
    if (proxy_poll_quantum_ns <= 0) throw ConfigError("latency model: poll quantum must be > 0");
    if (processors_per_pe < 1) throw ConfigError("latency model: processors_per_pe must be >= 1");
}

std::uint64_t SymmetricHeap::digest() const {
    std::vector<Extent> sorted = extents;
    std::sort(sorted.begin(), sorted.end(), [](const Extent& a, const Extent& b) {
        if (a.pe != b.pe) return a.pe < b.pe;
        if (a.offset != b.offset) return a.offset < b.offset;
        return a.length < b.length;
    });
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : sorted) {
        std::uint64_t v[3] = {e.pe, e.offset, e.length};
        h = fnv1a64(v, sizeof(v), h);
    }
    for (const auto& [flag, t] : flags) {
        (void)t;  // contents, not timing
        h = fnv1a64(&flag, sizeof(flag), h);
    }
    return h;
}

int select_qp(QpPolicy policy, std::uint32_t peer, int num_qps, ProxyChannel& channel) {
    if (num_qps < 1) throw ConfigError("select_qp: num_qps must be >= 1");
    if (policy == QpPolicy::PeerHash) return static_cast<int>(peer % static_cast<std::uint32_t>(num_qps));
    int qp = static_cast<int>(channel.rr_next % static_cast<std::uint32_t>(num_qps));
    channel.rr_next += 1;
    return qp;
}

TransportEngine::TransportEngine(SimEngine& sim, const LatencyModel& lat, Options opt,
                                 std::uint32_t num_pes, RunTrace& trace)
    : sim_(sim), lat_(lat), opt_(opt), trace_(trace) {
    lat_.validate();
    channels_.resize(num_pes);
    for (std::uint32_t p = 0; p < num_pes; ++p) channels_[p].pe = p;
}

void TransportEngine::record(TraceKind kind, std::uint32_t pe, const WorkRequest& req, TimeNs t,
                             int qp) {
    TraceRecord r;
    r.time = t;
    r.pe = pe;
    r.kind = kind;
    r.req_kind = req.kind;
    r.src_pe = req.src_pe;
    r.dst_pe = req.dst_pe;
    r.size = req.size;
    r.fence_flag = req.fence_flag;
    r.qp = qp;
    r.group_id = req.group_id;
    r.tile_id = req.tile_id;
    r.submit_seq = req.submit_seq;
    trace_.add(r);
}

void TransportEngine::note_put_enqueued(ProxyChannel& ch, const WorkRequest& req) {
    if (ch.put_backlog == 0) ch.epoch_dests.clear();
    ch.put_backlog += 1;
    ch.epoch_dests.insert(req.dst_pe);
    puts_submitted += 1;
    trace_.total_put_bytes_submitted += req.size;
}

std::uint64_t TransportEngine::submit(std::uint32_t channel_pe, const WorkRequest& req) {
    if (req.src_pe != channel_pe) {
        throw ModelError("submit: PE " + std::to_string(req.src_pe) +
                         " does not own channel of PE " + std::to_string(channel_pe));
    }
    return submit(req);
}

std::uint64_t TransportEngine::submit(const WorkRequest& req_in) {
    if (req_in.src_pe >= channels_.size()) {
        throw ModelError("submit: unknown source PE " + std::to_string(req_in.src_pe));
    }
    WorkRequest req = req_in;
    ProxyChannel& ch = channels_[req.src_pe];
    if (req.kind == ReqKind::FenceMarker && req.fence_flag) {
        throw ModelError("submit: FenceMarker cannot carry fence_flag");
    }
    if (req.kind == ReqKind::FenceMarker && opt_.suppress_fences) {
        return ch.next_submit_seq;  // fault-injection hook: fence dropped on the floor
    }
    req.submit_seq = ch.next_submit_seq++;
    if (req.kind == ReqKind::Put) note_put_enqueued(ch, req);
    record(TraceKind::Submit, req.src_pe, req, sim_.now());

    if (opt_.path == TransportPath::GpuDirect) {
        // GPU threads reach the NIC directly; ordering comes from the in-QP
        // pipeline, so FenceMarkers are never emitted on this path.
        if (req.kind == ReqKind::FenceMarker) {
            throw ModelError("submit: FenceMarker on the GPU-direct path");
        }
        int qp = select_qp(QpPolicy::PeerHash, req.dst_pe, opt_.num_qps, ch);
        nic_submit(connection(req.src_pe, req.dst_pe, qp), req);
        return req.submit_seq;
    }

    ch.fifo.push_back(req);
    request_drain(req.src_pe);
    return req.submit_seq;
}

void TransportEngine::request_drain(std::uint32_t pe) {
    ProxyChannel& ch = channels_[pe];
    if (ch.blocked || ch.drain_pending) return;
    ch.drain_pending = true;
    sim_.schedule(sim_.now(), [this, pe] {
        channels_[pe].drain_pending = false;
        if (!channels_[pe].blocked) drain(pe);
    });
}

void TransportEngine::drain(std::uint32_t pe) {
    ProxyChannel& ch = channels_[pe];
    while (!ch.fifo.empty() && !ch.blocked) {
        WorkRequest req = ch.fifo.front();
        switch (req.kind) {
            case ReqKind::Put: {
                ch.fifo.pop_front();
                int qp = select_qp(opt_.qp_policy, req.dst_pe, opt_.num_qps, ch);
                ch.outstanding += 1;
                nic_submit(connection(pe, req.dst_pe, qp), req);
                break;
            }
            case ReqKind::FenceMarker: {
                if (opt_.ordering == OrderingMode::NicFence) {
                    ch.fifo.pop_front();
                    ch.pending_fence = true;  // zero blocking; next Signal carries the flag
                    break;
                }
                if (ch.outstanding > 0) {
                    ch.blocked = true;
                    ch.block_began = sim_.now();
                    ch.blocking_episodes += 1;
                    record(TraceKind::ProxyBlockBegin, pe, req, sim_.now());
                    schedule_fence_poll(pe);
                    return;
                }
                ch.fifo.pop_front();
                ch.per_fence_drain.push_back(0);
                break;
            }
            case ReqKind::Signal: {
                ch.fifo.pop_front();
                if (ch.pending_fence) {
                    req.fence_flag = true;
                    ch.pending_fence = false;
                }
                int qp = select_qp(opt_.qp_policy, req.dst_pe, opt_.num_qps, ch);
                if (opt_.fence_waits_all) ch.outstanding += 1;
                nic_submit(connection(pe, req.dst_pe, qp), req);
                break;
            }
        }
    }
}

void TransportEngine::schedule_fence_poll(std::uint32_t pe) {
    sim_.schedule(sim_.now() + lat_.proxy_poll_quantum_ns, [this, pe] {
        ProxyChannel& ch = channels_[pe];
        if (!ch.blocked) return;
        if (ch.outstanding > 0) {
            schedule_fence_poll(pe);
            return;
        }
        // completion counter reached its target at some earlier instant; the
        // proxy notices at this poll boundary
        TimeNs drained = sim_.now() - ch.block_began;
        ch.proxy_blocked_total += drained;
        ch.per_fence_drain.push_back(drained);
        ch.blocked = false;
        WorkRequest fence = ch.fifo.front();
        ch.fifo.pop_front();
        record(TraceKind::ProxyBlockEnd, pe, fence, sim_.now());
        drain(pe);
    });
}

NicConnection& TransportEngine::connection(std::uint32_t src, std::uint32_t dst, int qp) {
    ConnKey key{src, dst, qp};
    auto it = conns_.find(key);
    if (it == conns_.end()) {
        NicConnection conn;
        conn.src_pe = src;
        conn.dst_pe = dst;
        conn.qp = qp;
        it = conns_.emplace(key, conn).first;
    }
    return it->second;
}

void TransportEngine::nic_submit(NicConnection& conn, WorkRequest req) {
    conn.pipeline.push_back(std::move(req));
    conn_advance(conn);
}

void TransportEngine::conn_advance(NicConnection& conn) {
    while (!conn.pipeline.empty()) {
        WorkRequest& head = conn.pipeline.front();
        if (head.fence_flag && conn.in_flight > 0) {
            if (!conn.blocked_head) {
                conn.blocked_head = true;
                conn.stall_began = sim_.now();
                conn.nic_stall_episodes += 1;
                record(TraceKind::NicBlockBegin, conn.src_pe, head, sim_.now(), conn.qp);
            }
            return;
        }
        if (conn.blocked_head) {
            conn.blocked_head = false;
            conn.nic_stall_total += sim_.now() - conn.stall_began;
            record(TraceKind::NicBlockEnd, conn.src_pe, head, sim_.now(), conn.qp);
        }
        WorkRequest req = conn.pipeline.front();
        conn.pipeline.pop_front();
        begin_service(conn, std::move(req));
    }
}

void TransportEngine::begin_service(NicConnection& conn, WorkRequest req) {
    TimeNs now = sim_.now();
    record(TraceKind::NicServiceStart, conn.src_pe, req, now, conn.qp);
    conn.in_flight += 1;

    ProxyChannel& ch = channels_[req.src_pe];
    int fanout = ch.fanout();

    TimeNs ready = now + lat_.per_request_nic_service_ns;
    TimeNs wire_start = std::max(ready, conn.wire_free);
    TimeNs wire_exit = wire_start + lat_.wire_ns(req.size);
    conn.wire_free = wire_exit;
    TimeNs data_time = wire_exit + lat_.base_rtt_ns;
    // reliable connection: deliveries never reorder within one connection
    data_time = std::max(data_time, conn.last_delivery);
    conn.last_delivery = data_time;
    TimeNs proxy_seen = data_time + lat_.tail_ns(fanout);

    ConnKey key{conn.src_pe, conn.dst_pe, conn.qp};
    sim_.schedule(data_time, [this, key, req] {
        NicConnection& c = conns_.at(key);
        complete_data(c, req, sim_.now());
    });
    std::uint32_t pe = req.src_pe;
    bool counts = req.kind == ReqKind::Put || opt_.fence_waits_all;
    if (opt_.path != TransportPath::GpuDirect && counts) {
        sim_.schedule(proxy_seen, [this, pe] { channels_[pe].outstanding -= 1; });
    }
}

void TransportEngine::complete_data(NicConnection& conn, const WorkRequest& req, TimeNs t) {
    conn.in_flight -= 1;
    record(TraceKind::Completion, req.src_pe, req, t, conn.qp);
    if (req.kind == ReqKind::Put) {
        heap_.write_extent(req.dst_pe, req.heap_offset, req.size, t);
        trace_.total_put_bytes_delivered += req.size;
        puts_completed += 1;
        ProxyChannel& ch = channels_[req.src_pe];
        ch.put_backlog -= 1;
        if (ch.put_backlog == 0) ch.epoch_dests.clear();
    } else if (req.kind == ReqKind::Signal) {
        deliver_signal(req.flag_id, req.src_pe, req.dst_pe, t, req.tile_id);
    }
    conn_advance(conn);
}

void TransportEngine::deliver_signal(std::uint64_t flag, std::uint32_t src_pe, std::uint32_t dst_pe,
                                     TimeNs t, std::int64_t tile_id) {
    heap_.set_flag(flag, t);
    WorkRequest marker;
    marker.kind = ReqKind::Signal;
    marker.src_pe = src_pe;
    marker.dst_pe = dst_pe;
    marker.flag_id = flag;
    marker.tile_id = tile_id;
    record(TraceKind::SignalVisible, dst_pe, marker, t);
    if (on_signal_visible) on_signal_visible(tile_id, dst_pe, t);
}

void TransportEngine::local_put(const WorkRequest& put, bool with_signal) {
    TimeNs now = sim_.now();
    record(TraceKind::Submit, put.src_pe, put, now);
    trace_.total_put_bytes_submitted += put.size;
    puts_submitted += 1;
    TimeNs arrive = now + lat_.nvlink_latency_ns;
    std::uint64_t flag = put.flag_id;
    std::int64_t tile = put.tile_id;
    WorkRequest copy = put;
    sim_.schedule(arrive, [this, copy, with_signal, flag, tile] {
        TimeNs t = sim_.now();
        heap_.write_extent(copy.dst_pe, copy.heap_offset, copy.size, t);
        trace_.total_put_bytes_delivered += copy.size;
        puts_completed += 1;
        record(TraceKind::Completion, copy.src_pe, copy, t);
        if (with_signal) deliver_signal(flag, copy.src_pe, copy.dst_pe, t, tile);
    });
}

}  // namespace sigsim
