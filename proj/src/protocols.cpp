// SPDX-License-Identifier: Apache-2.0
#include "sigsim/protocols.hpp"

#include <algorithm>
#include <map>
#include <memory>

namespace sigsim {

const char* to_string(Signaling s) { return s == Signaling::Coupled ? "coupled" : "decoupled"; }

std::string ProtocolConfig::mode_name() const {
    if (transport == TransportPath::GpuDirect) {
        return signaling == Signaling::Coupled ? "gpu_direct" : "gpu_direct_decoupled";
    }
    if (signaling == Signaling::Coupled) {
        return ordering == OrderingMode::ProxyFence ? "vanilla" : "nic_ordering";
    }
    return ordering == OrderingMode::ProxyFence ? "decoupled" : "combined";
}

ProtocolConfig vanilla_protocol() { return ProtocolConfig{}; }

ProtocolConfig decoupled_protocol(std::int64_t group_size) {
    ProtocolConfig p;
    p.signaling = Signaling::Decoupled;
    p.group_size = group_size;
    return p;
}

ProtocolConfig nic_ordering_protocol() {
    ProtocolConfig p;
    p.ordering = OrderingMode::NicFence;
    return p;
}

ProtocolConfig combined_protocol(std::int64_t group_size) {
    ProtocolConfig p;
    p.signaling = Signaling::Decoupled;
    p.ordering = OrderingMode::NicFence;
    p.group_size = group_size;
    return p;
}

ProtocolConfig gpu_direct_protocol(Signaling signaling) {
    ProtocolConfig p;
    p.signaling = signaling;
    p.transport = TransportPath::GpuDirect;
    return p;
}

std::vector<SignalGroup> assign_groups(const std::vector<TransferSpec>& transfers,
                                       std::int64_t group_size) {
    std::vector<std::size_t> order(transfers.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const TransferSpec& x = transfers[a];
        const TransferSpec& y = transfers[b];
        if (x.dst_pe != y.dst_pe) return x.dst_pe < y.dst_pe;
        if (x.expert != y.expert) return x.expert < y.expert;
        return x.tile_id < y.tile_id;
    });

    std::vector<SignalGroup> groups;
    if (group_size == 0) {
        // per-PE default: one group per remote destination
        std::map<std::uint32_t, std::size_t> by_dst;
        for (std::size_t idx : order) {
            std::uint32_t dst = transfers[idx].dst_pe;
            auto it = by_dst.find(dst);
            if (it == by_dst.end()) {
                it = by_dst.emplace(dst, groups.size()).first;
                groups.push_back(SignalGroup{static_cast<std::int64_t>(groups.size()), {}, 0, 0, 0});
            }
            groups[it->second].members.push_back(idx);
        }
    } else {
        if (group_size < 0 || transfers.size() % static_cast<std::size_t>(group_size) != 0) {
            throw ConfigError("assign_groups: group size " + std::to_string(group_size) +
                              " does not divide transfer count " + std::to_string(transfers.size()));
        }
        std::size_t n_groups = transfers.size() / static_cast<std::size_t>(group_size);
        groups.resize(n_groups);
        for (std::size_t g = 0; g < n_groups; ++g) groups[g].group_id = static_cast<std::int64_t>(g);
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            groups[pos / static_cast<std::size_t>(group_size)].members.push_back(order[pos]);
        }
    }
    for (auto& g : groups) {
        g.leader = g.members.front();
        g.target = static_cast<std::int64_t>(g.members.size());
    }
    return groups;
}

namespace {

/// Per-run orchestration: schedules CTA issue events per protocol, feeds the
/// transport engine, and runs receive-side tile compute.
class DispatchRunner {
  public:
    DispatchRunner(const ProtocolConfig& protocol, const DispatchWorkload& workload,
                   const LatencyModel& latency, std::uint64_t seed, std::uint64_t config_hash)
        : protocol_(protocol), wl_(workload), lat_(latency), rng_(seed) {
        trace_.seed = seed;
        trace_.config_hash = config_hash;
        trace_.workload_digest = wl_.digest();
        TransportEngine::Options opt;
        opt.ordering = protocol.ordering;
        opt.qp_policy = protocol.qp_policy;
        opt.path = protocol.transport;
        opt.num_qps = wl_.cluster.num_qps;
        opt.fence_waits_all = protocol.fence_waits_all;
        opt.suppress_fences = protocol.suppress_fences;
        engine_ = std::make_unique<TransportEngine>(sim_, lat_, opt,
                                                    static_cast<std::uint32_t>(wl_.cluster.total_pes()),
                                                    trace_);
        compute_on_ = !wl_.microbench && !wl_.put_only && wl_.model.compute_intensity > 0.0;
        if (compute_on_) {
            slot_free_.assign(static_cast<std::size_t>(wl_.cluster.total_pes()),
                              std::vector<TimeNs>(static_cast<std::size_t>(lat_.processors_per_pe), 0));
            engine_->on_signal_visible = [this](std::int64_t tile, std::uint32_t dst, TimeNs t) {
                start_tile_compute(tile, dst, t);
            };
        }
    }

    RunTrace run() {
        index_transfers();
        schedule_issues();
        sim_.run_until_idle();
        finish();
        return std::move(trace_);
    }

  private:
    struct SourceState {
        std::vector<std::size_t> transfers;  // indices into wl_.remote_transfers
        std::vector<SignalGroup> groups;
        std::vector<std::size_t> group_of;  // parallel to `transfers` positions
        std::vector<bool> phase1_done;
    };

    void index_transfers() {
        auto pes = static_cast<std::size_t>(wl_.cluster.total_pes());
        sources_.resize(pes);
        for (std::size_t i = 0; i < wl_.remote_transfers.size(); ++i) {
            sources_[wl_.remote_transfers[i].src_pe].transfers.push_back(i);
        }
        if (compute_on_) {
            for (const auto& t : wl_.remote_transfers) tile_bytes_[t.tile_id] = t.bytes;
            for (const auto& t : wl_.local_transfers) tile_bytes_[t.tile_id] = t.bytes;
        }
        if (protocol_.signaling != Signaling::Decoupled || wl_.put_only) return;
        for (auto& src : sources_) {
            std::vector<TransferSpec> own;
            own.reserve(src.transfers.size());
            for (std::size_t idx : src.transfers) own.push_back(wl_.remote_transfers[idx]);
            if (own.empty()) continue;
            src.groups = assign_groups(own, protocol_.group_size);
            src.group_of.assign(own.size(), 0);
            src.phase1_done.assign(own.size(), false);
            for (std::size_t g = 0; g < src.groups.size(); ++g) {
                for (std::size_t pos : src.groups[g].members) src.group_of[pos] = g;
            }
        }
    }

    TimeNs issue_latency() {
        TimeNs jitter = lat_.issue_jitter_ns > 0
                            ? static_cast<TimeNs>(rng_.next_below(
                                  static_cast<std::uint64_t>(lat_.issue_jitter_ns) + 1))
                            : 0;
        TimeNs extra = protocol_.transport == TransportPath::GpuDirect ? lat_.gpu_direct_issue_cost_ns : 0;
        return lat_.issue_cost_ns + extra + jitter;
    }

    void schedule_issues() {
        // every transfer is staged by its own CTA; all CTAs start at t=0
        for (std::uint32_t pe = 0; pe < sources_.size(); ++pe) {
            for (std::size_t pos = 0; pos < sources_[pe].transfers.size(); ++pos) {
                TimeNs done = issue_latency();
                sim_.schedule(done, [this, pe, pos] { issue_remote(pe, pos); });
            }
        }
        for (const auto& t : wl_.local_transfers) {
            TimeNs done = issue_latency();
            sim_.schedule(done, [this, &t] { engine_->local_put(make_put(t), !wl_.put_only); });
        }
    }

    WorkRequest make_put(const TransferSpec& t) const {
        WorkRequest r;
        r.kind = ReqKind::Put;
        r.src_pe = t.src_pe;
        r.dst_pe = t.dst_pe;
        r.size = t.bytes;
        r.tile_id = t.tile_id;
        r.flag_id = static_cast<std::uint64_t>(t.tile_id);
        r.heap_offset = t.heap_offset;
        return r;
    }

    WorkRequest make_signal(const TransferSpec& t, std::int64_t group) const {
        WorkRequest r;
        r.kind = ReqKind::Signal;
        r.src_pe = t.src_pe;
        r.dst_pe = t.dst_pe;
        r.size = lat_.signal_bytes;
        r.tile_id = t.tile_id;
        r.flag_id = static_cast<std::uint64_t>(t.tile_id);
        r.group_id = group;
        return r;
    }

    WorkRequest make_fence(std::uint32_t src, std::int64_t group) const {
        WorkRequest r;
        r.kind = ReqKind::FenceMarker;
        r.src_pe = src;
        r.dst_pe = src;
        r.size = 0;
        r.group_id = group;
        return r;
    }

    void issue_remote(std::uint32_t pe, std::size_t pos) {
        SourceState& src = sources_[pe];
        const TransferSpec& t = wl_.remote_transfers[src.transfers[pos]];
        if (wl_.put_only) {
            engine_->submit(make_put(t));
            return;
        }
        if (protocol_.signaling == Signaling::Coupled) {
            coupled_put_signal(t);
            return;
        }
        decoupled_phase1(pe, pos, t);
    }

    // vanilla path: Put, fence, Signal as three consecutive FIFO entries (the
    // GPU-direct pipeline orders in-QP, so no fence is emitted there)
    void coupled_put_signal(const TransferSpec& t) {
        engine_->submit(make_put(t));
        if (protocol_.transport == TransportPath::Proxy) {
            engine_->submit(make_fence(t.src_pe, -1));
        }
        engine_->submit(make_signal(t, -1));
    }

    void decoupled_phase1(std::uint32_t pe, std::size_t pos, const TransferSpec& t) {
        SourceState& src = sources_[pe];
        if (src.phase1_done[pos]) {
            throw ModelError("decoupled_phase1: duplicate call for tile " + std::to_string(t.tile_id));
        }
        src.phase1_done[pos] = true;
        engine_->submit(make_put(t));  // no fence, no signal
        SignalGroup& group = src.groups[src.group_of[pos]];
        group.counter += 1;
        if (group.counter > group.target) {
            throw ModelError("decoupled_phase1: counter overflow in group " +
                             std::to_string(group.group_id));
        }
        // non-leaders resume as schedulable; the leader wakes once the last
        // member's Put has entered the FIFO, after any same-instant Phase-1
        // submissions from concurrent CTAs
        if (group.counter == group.target) {
            std::size_t g = src.group_of[pos];
            sim_.schedule(sim_.now(), [this, pe, g] {
                SignalGroup& grp = sources_[pe].groups[g];
                decoupled_phase2(pe, grp, grp.leader);
            });
        }
    }

    void decoupled_phase2(std::uint32_t pe, SignalGroup& group, std::size_t caller) {
        if (caller != group.leader) {
            throw ModelError("decoupled_phase2: invoked by non-leader");
        }
        if (protocol_.leader_wait_blocks_slot && compute_on_) {
            // the waiting leader occupied a processor slot until now
            auto& slots = slot_free_[pe];
            auto it = std::min_element(slots.begin(), slots.end());
            *it = std::max(*it, sim_.now());
        }
        if (protocol_.transport == TransportPath::Proxy) {
            engine_->submit(make_fence(pe, group.group_id));  // one per group
        }
        for (std::size_t pos : group.members) {
            const TransferSpec& t = wl_.remote_transfers[sources_[pe].transfers[pos]];
            engine_->submit(make_signal(t, group.group_id));
        }
    }

    void start_tile_compute(std::int64_t tile, std::uint32_t dst, TimeNs visible) {
        auto it = tile_bytes_.find(tile);
        if (it == tile_bytes_.end()) return;
        TimeNs dur = lat_.compute_ns(it->second, wl_.model.compute_intensity);
        if (dur <= 0) return;
        auto& slots = slot_free_[dst];
        auto slot = std::min_element(slots.begin(), slots.end());
        TimeNs start = std::max(visible, *slot);
        *slot = start + dur;
        std::uint64_t bytes = it->second;
        sim_.schedule(start, [this, tile, dst, bytes, start, dur] {
            TraceRecord r;
            r.time = start;
            r.pe = dst;
            r.kind = TraceKind::ComputeStart;
            r.tile_id = tile;
            r.size = bytes;
            trace_.add(r);
            sim_.schedule(start + dur, [this, tile, dst, bytes, start, dur] {
                TraceRecord e;
                e.time = start + dur;
                e.pe = dst;
                e.kind = TraceKind::ComputeEnd;
                e.tile_id = tile;
                e.size = bytes;
                trace_.add(e);
            });
        });
    }

    void finish() {
        TimeNs makespan = 0;
        for (const auto& r : trace_.records) makespan = std::max(makespan, r.time);
        trace_.makespan = makespan;
        trace_.heap_digest = engine_->heap().digest();
    }

    const ProtocolConfig& protocol_;
    const DispatchWorkload& wl_;
    LatencyModel lat_;
    SeededRng rng_;
    SimEngine sim_;
    RunTrace trace_;
    std::unique_ptr<TransportEngine> engine_;
    std::vector<SourceState> sources_;
    std::vector<std::vector<TimeNs>> slot_free_;
    std::map<std::int64_t, std::uint64_t> tile_bytes_;
    bool compute_on_ = false;
};

}  // namespace

RunTrace run_dispatch(const ProtocolConfig& protocol, const DispatchWorkload& workload,
                      const LatencyModel& latency, std::uint64_t seed, std::uint64_t config_hash) {
    latency.validate();
    if (protocol.signaling == Signaling::Decoupled && protocol.group_size > 0) {
        // fail fast before the sim starts; assign_groups re-checks per source
        for (std::uint32_t pe = 0; pe < static_cast<std::uint32_t>(workload.cluster.total_pes());
             ++pe) {
            std::size_t count = 0;
            for (const auto& t : workload.remote_transfers) count += t.src_pe == pe ? 1 : 0;
            if (count % static_cast<std::size_t>(protocol.group_size) != 0) {
                throw ConfigError("run_dispatch: group size does not divide remote transfer count");
            }
        }
    }
    DispatchRunner runner(protocol, workload, latency, seed, config_hash);
    return runner.run();
}

}  // namespace sigsim
