// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sigsim/protocols.hpp"
#include "sigsim/transport.hpp"
#include "sigsim/workload.hpp"

namespace sigsim {

/// Synthetic-transfer settings for the fence-cost microbenchmark. When set,
/// the run ignores model/token routing and issues fixed-size transfers.
struct MicrobenchConfig {
    std::int64_t concurrency = 96;
    std::uint64_t message_bytes = 4096;
};

/// Everything one run needs. Parsed strictly: unknown keys are errors, since a
/// silent typo in a sweep file wastes a whole grid.
struct ExperimentConfig {
    ProtocolConfig protocol;
    ModelConfig model;
    bool model_set = false;
    ClusterConfig cluster;
    bool cluster_set = false;
    std::uint64_t tokens_per_pe = 1024;
    double skew = 0.0;
    std::uint64_t tile_bytes = 0;
    bool put_only = false;
    std::optional<MicrobenchConfig> microbench;
    LatencyModel latency;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    // sweep axes: empty vector = not swept
    std::vector<std::uint64_t> sweep_tokens;
    std::vector<std::int64_t> sweep_concurrency;
    std::vector<std::uint64_t> sweep_message_bytes;
    std::vector<int> sweep_nodes;
    std::vector<std::int64_t> sweep_group_size;
    std::vector<std::string> sweep_protocols;  // mode names, e.g. "vanilla"

    std::uint64_t config_hash() const;
    std::string canonical() const;  // stable textual form the hash covers

    DispatchWorkload build_workload() const;
    void validate() const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

// Named protocol modes accepted in configs and on the CLI:
// vanilla | decoupled | nic_ordering | combined | put_only | gpu_direct |
// gpu_direct_decoupled.
ProtocolConfig protocol_by_name(const std::string& name, std::int64_t group_size,
                                bool* wants_put_only = nullptr);

// "slingshot-like" is the shipped default; "calibration" documented in README.
LatencyModel latency_preset(const std::string& name);

}  // namespace sigsim
