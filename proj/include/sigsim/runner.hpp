// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigsim/config.hpp"
#include "sigsim/metrics.hpp"

namespace sigsim {

/// One CSV row of a sweep: the grid point, its protocol, and the headline
/// metrics pulled from the trace.
struct SummaryRow {
    std::string protocol;
    int nodes = 0;
    int gpus_per_node = 0;
    std::uint64_t tokens = 0;
    std::int64_t concurrency = 0;
    std::uint64_t message_bytes = 0;
    double skew = 0.0;
    std::int64_t group_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    TimeNs makespan_ns = 0;
    std::uint64_t total_bytes = 0;
    std::int64_t fence_count = 0;
    std::int64_t proxy_stops = 0;
    TimeNs proxy_blocked_ns = 0;
    std::int64_t nic_stalls = 0;
    TimeNs nic_stall_ns = 0;
    std::int64_t flagged_signals = 0;
    std::int64_t violations = 0;
    double efficiency = -1.0;  // < 0: no put-only twin at this grid point
};

std::string csv_header(std::uint64_t sweep_hash);
std::string csv_row(const SummaryRow& row);

struct RunResult {
    SummaryRow row;
    RunTrace trace;
};

// Runs one experiment point end to end.
RunResult run_single(const ExperimentConfig& cfg);

struct SweepOptions {
    bool emit_traces = false;
    bool force = false;
    int jobs = 1;
};

// Cartesian sweep over the config's axes; one CSV row per (point, protocol).
// Completed points (same hash, existing row file) are skipped unless forced.
std::vector<SummaryRow> cmd_sweep(const ExperimentConfig& cfg, const SweepOptions& opt,
                                  const std::string& csv_path);

struct AblationRow {
    std::string mode;
    std::int64_t fence_count = 0;
    std::string per_fence_cost;  // "drain" (full pipeline drain) or "flag" (NIC-side)
    TimeNs makespan_ns = 0;
    double speedup_over_vanilla = 1.0;
};

// vanilla + decoupled-only + nic-ordering-only + combined on one workload.
std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& csv_path);

struct VerifyOutcome {
    std::int64_t safe_trials = 0;
    std::int64_t safe_violations = 0;
    std::int64_t unsafe_violations = 0;  // from the round-robin + NIC-fence demo
    bool fault_injected = false;
    std::int64_t fault_trials = 0;
    std::int64_t fault_trials_with_violations = 0;
    std::vector<std::string> notes;

    bool ok() const {
        if (fault_injected) return false;  // detected violations are the expected outcome
        return safe_violations == 0 && unsafe_violations >= 1;
    }
};

// Randomized ordering-safety trials across all safe protocol/transport modes,
// plus the unsafe round-robin + NIC-fence demonstration. With fault injection
// the checker must catch the (now broken) vanilla protocol.
VerifyOutcome cmd_verify(const ExperimentConfig& cfg, std::int64_t trials, bool inject_fence_fault);

struct FitRow {
    std::string group;
    AlphaBetaFit fit;
    int points = 0;
    bool error = false;
    std::string error_text;
};

// OLS per configuration group over (message_bytes, makespan_ns) rows of a
// sweep CSV. Degenerate groups produce error-marker rows, not aborts.
std::vector<FitRow> cmd_fit_csv(const std::string& csv_in, const std::string& csv_out);

void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace sigsim
