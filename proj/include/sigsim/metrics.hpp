// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigsim/trace.hpp"
#include "sigsim/workload.hpp"

namespace sigsim {

/// Fence cost bookkeeping extracted from one trace.
struct FenceAccounting {
    std::int64_t fence_count = 0;  // FenceMarkers submitted
    std::int64_t proxy_stop_episodes = 0;
    TimeNs proxy_blocked_total = 0;
    std::vector<TimeNs> per_fence;  // blocking-drain durations
    std::int64_t nic_stall_episodes = 0;
    TimeNs nic_stall_total = 0;
    std::int64_t flagged_signal_count = 0;
};

FenceAccounting fence_accounting(const RunTrace& trace);

// Throughput of the signaled run normalized to its put-only twin over the
// same workload geometry: put_only makespan / signaled makespan.
double signaling_efficiency(const RunTrace& signaled, const RunTrace& put_only);

struct AlphaBetaFit {
    double alpha_ns = 0.0;
    double beta_ns_per_byte = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares for T = alpha + beta * M over (bytes, ns) points.
AlphaBetaFit fit_alpha_beta(const std::vector<std::pair<double, double>>& points);

/// Latency deltas attributed to each mechanism, telescoping from the coupled
/// baseline to the combined mode. Components sum exactly to the total.
struct SpeedupDecomposition {
    TimeNs total = 0;
    TimeNs submission_reordering = 0;  // coupled -> decoupled @ group size 1
    TimeNs fence_count_reduction = 0;  // group size 1 -> knee
    TimeNs nic_side_ordering = 0;      // knee -> combined
    double reordering_fraction = 0.0;
    double fence_reduction_fraction = 0.0;
    double nic_ordering_fraction = 0.0;
};

SpeedupDecomposition speedup_decomposition(const RunTrace& coupled, const RunTrace& decoupled_gs1,
                                           const RunTrace& decoupled_knee, const RunTrace& combined);

struct OrderingViolation {
    std::int64_t tile_id = -1;
    std::uint32_t src_pe = 0;
    std::uint32_t dst_pe = 0;
    TimeNs signal_visible = 0;
    TimeNs put_completion = 0;
};

// For every Signal, checks that it became visible no earlier than the
// completion of every Put it announces. Exhaustive; a violation is a result,
// not an error.
std::vector<OrderingViolation> verify_ordering(const RunTrace& trace);

struct ConservationReport {
    bool pass = true;
    std::vector<std::string> failures;

    void fail(std::string msg) {
        pass = false;
        failures.push_back(std::move(msg));
    }
};

// Byte conservation, one signal per transfer, flags set exactly once.
ConservationReport conservation_check(const RunTrace& trace, const DispatchWorkload& workload);

}  // namespace sigsim
