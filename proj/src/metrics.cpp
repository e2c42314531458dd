// SPDX-License-Identifier: Apache-2.0
#include "sigsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sigsim {

FenceAccounting fence_accounting(const RunTrace& trace) {
    FenceAccounting acc;
    // block intervals are per PE / per connection; match begin/end in order
    std::map<std::uint32_t, TimeNs> proxy_open;
    std::map<std::tuple<std::uint32_t, std::uint32_t, int>, TimeNs> nic_open;
    for (const auto& r : trace.records) {
        switch (r.kind) {
            case TraceKind::Submit:
                if (r.req_kind == ReqKind::FenceMarker) acc.fence_count += 1;
                break;
            case TraceKind::NicServiceStart:
                if (r.req_kind == ReqKind::Signal && r.fence_flag) acc.flagged_signal_count += 1;
                break;
            case TraceKind::ProxyBlockBegin:
                if (proxy_open.count(r.pe)) throw TraceError("nested proxy_block_begin");
                proxy_open[r.pe] = r.time;
                acc.proxy_stop_episodes += 1;
                break;
            case TraceKind::ProxyBlockEnd: {
                auto it = proxy_open.find(r.pe);
                if (it == proxy_open.end()) throw TraceError("proxy_block_end without begin");
                acc.proxy_blocked_total += r.time - it->second;
                acc.per_fence.push_back(r.time - it->second);
                proxy_open.erase(it);
                break;
            }
            case TraceKind::NicBlockBegin: {
                auto key = std::make_tuple(r.pe, r.dst_pe, r.qp);
                if (nic_open.count(key)) throw TraceError("nested nic_block_begin");
                nic_open[key] = r.time;
                acc.nic_stall_episodes += 1;
                break;
            }
            case TraceKind::NicBlockEnd: {
                auto key = std::make_tuple(r.pe, r.dst_pe, r.qp);
                auto it = nic_open.find(key);
                if (it == nic_open.end()) throw TraceError("nic_block_end without begin");
                acc.nic_stall_total += r.time - it->second;
                nic_open.erase(it);
                break;
            }
            default:
                break;
        }
    }
    if (!proxy_open.empty() || !nic_open.empty()) {
        throw TraceError("unmatched block_begin at end of trace");
    }
    return acc;
}

double signaling_efficiency(const RunTrace& signaled, const RunTrace& put_only) {
    if (signaled.workload_digest != put_only.workload_digest) {
        throw ConfigError("signaling_efficiency: traces come from different workload geometries");
    }
    if (signaled.makespan <= 0) return 1.0;
    return static_cast<double>(put_only.makespan) / static_cast<double>(signaled.makespan);
}

AlphaBetaFit fit_alpha_beta(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw ConfigError("fit_alpha_beta: need at least 2 points");
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [x, y] : points) {
        mean_x += x;
        mean_y += y;
    }
    mean_x /= static_cast<double>(points.size());
    mean_y /= static_cast<double>(points.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if (sxx == 0.0) throw ConfigError("fit_alpha_beta: degenerate fit, all message sizes equal");
    AlphaBetaFit fit;
    fit.beta_ns_per_byte = sxy / sxx;
    fit.alpha_ns = mean_y - fit.beta_ns_per_byte * mean_x;
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
        double e = y - (fit.alpha_ns + fit.beta_ns_per_byte * x);
        ss_res += e * e;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return fit;
}

SpeedupDecomposition speedup_decomposition(const RunTrace& coupled, const RunTrace& decoupled_gs1,
                                           const RunTrace& decoupled_knee, const RunTrace& combined) {
    const RunTrace* runs[] = {&coupled, &decoupled_gs1, &decoupled_knee, &combined};
    for (const RunTrace* r : runs) {
        if (r->workload_digest != coupled.workload_digest) {
            throw ConfigError("speedup_decomposition: runs use different workloads");
        }
    }
    SpeedupDecomposition d;
    d.submission_reordering = coupled.makespan - decoupled_gs1.makespan;
    d.fence_count_reduction = decoupled_gs1.makespan - decoupled_knee.makespan;
    d.nic_side_ordering = decoupled_knee.makespan - combined.makespan;
    d.total = coupled.makespan - combined.makespan;
    if (d.total != 0) {
        d.reordering_fraction = static_cast<double>(d.submission_reordering) / d.total;
        d.fence_reduction_fraction = static_cast<double>(d.fence_count_reduction) / d.total;
        d.nic_ordering_fraction = static_cast<double>(d.nic_side_ordering) / d.total;
    }
    return d;
}

std::vector<OrderingViolation> verify_ordering(const RunTrace& trace) {
    // per tile: put completion time (data at receiver) and signal visibility
    std::map<std::int64_t, TimeNs> put_done;
    for (const auto& r : trace.records) {
        if (r.kind == TraceKind::Completion && r.req_kind == ReqKind::Put && r.tile_id >= 0) {
            auto it = put_done.find(r.tile_id);
            if (it == put_done.end() || r.time > it->second) put_done[r.tile_id] = r.time;
        }
    }
    std::vector<OrderingViolation> violations;
    for (const auto& r : trace.records) {
        if (r.kind != TraceKind::SignalVisible || r.tile_id < 0) continue;
        auto it = put_done.find(r.tile_id);
        if (it == put_done.end()) continue;  // announced put never completed; conservation flags it
        if (r.time < it->second) {
            violations.push_back(
                OrderingViolation{r.tile_id, r.src_pe, r.dst_pe, r.time, it->second});
        }
    }
    return violations;
}

ConservationReport conservation_check(const RunTrace& trace, const DispatchWorkload& workload) {
    ConservationReport rep;

    std::uint64_t expected_bytes = workload.total_remote_bytes();
    for (const auto& t : workload.local_transfers) expected_bytes += t.bytes;

    std::map<std::int64_t, std::uint64_t> submitted;  // tile -> bytes
    std::map<std::int64_t, int> completed;
    std::map<std::int64_t, int> signals_visible;
    std::uint64_t delivered_bytes = 0;
    for (const auto& r : trace.records) {
        if (r.req_kind == ReqKind::Put && r.kind == TraceKind::Submit) submitted[r.tile_id] = r.size;
        if (r.req_kind == ReqKind::Put && r.kind == TraceKind::Completion) {
            completed[r.tile_id] += 1;
            delivered_bytes += r.size;
        }
        if (r.kind == TraceKind::SignalVisible) signals_visible[r.tile_id] += 1;
    }

    if (trace.total_put_bytes_submitted != expected_bytes) {
        rep.fail("submitted bytes " + std::to_string(trace.total_put_bytes_submitted) +
                 " != workload bytes " + std::to_string(expected_bytes));
    }
    if (delivered_bytes != trace.total_put_bytes_submitted) {
        rep.fail("delivered bytes " + std::to_string(delivered_bytes) + " != submitted bytes " +
                 std::to_string(trace.total_put_bytes_submitted));
    }
    for (const auto& [tile, bytes] : submitted) {
        (void)bytes;
        auto it = completed.find(tile);
        if (it == completed.end()) {
            rep.fail("put tile " + std::to_string(tile) + " has no completion");
        } else if (it->second != 1) {
            rep.fail("put tile " + std::to_string(tile) + " completed " +
                     std::to_string(it->second) + " times");
        }
    }
    if (!workload.put_only) {
        for (const auto& [tile, bytes] : submitted) {
            (void)bytes;
            auto it = signals_visible.find(tile);
            if (it == signals_visible.end()) {
                rep.fail("transfer tile " + std::to_string(tile) + " was never signaled");
            } else if (it->second != 1) {
                rep.fail("tile " + std::to_string(tile) + " signaled " + std::to_string(it->second) +
                         " times");
            }
        }
    }
    return rep;
}

}  // namespace sigsim
