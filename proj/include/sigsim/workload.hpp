// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sigsim/sim.hpp"

namespace sigsim {

/// MoE model geometry plus receive-side compute intensity (TFLOPs per GB of
/// communicated data). intensity <= 0 means "not provided"; end-to-end runs
/// with compute enabled then require an explicit value.
struct ModelConfig {
    std::string name = "custom";
    std::int64_t hidden_dim = 0;        // H
    std::int64_t intermediate_dim = 0;  // I
    std::int64_t experts = 0;           // E
    std::int64_t top_k = 0;             // k
    double compute_intensity = 0.0;

    void validate() const;
};

/// Built-in presets: qwen3-30b, gpt-oss-120b, deepseek-v3, llama4-scout.
std::optional<ModelConfig> model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

struct ClusterConfig {
    int nodes = 1;
    int gpus_per_node = 4;
    int num_qps = 1;

    int total_pes() const { return nodes * gpus_per_node; }
    void validate() const;
};

/// One Put-sized unit of the dispatch: a whole per-expert transfer, or one
/// tile of it when tile splitting is on.
struct TransferSpec {
    std::uint32_t src_pe = 0;
    std::uint32_t dst_pe = 0;
    std::int64_t expert = -1;
    std::uint64_t bytes = 0;
    std::int64_t tile_id = -1;  // globally unique; doubles as the flag word id
    std::uint64_t heap_offset = 0;
};

struct DispatchWorkload {
    ModelConfig model;
    ClusterConfig cluster;
    std::uint64_t tokens_per_pe = 0;  // S
    double skew = 0.0;                // Zipf exponent, 0 = balanced
    std::uint64_t seed = 0;
    std::uint64_t tile_bytes = 0;  // 0 = one merged transfer per remote expert
    bool put_only = false;
    bool microbench = false;  // synthetic, no compute, remote-only

    std::vector<TransferSpec> remote_transfers;  // sorted by (src, dst, expert, tile)
    std::vector<TransferSpec> local_transfers;

    std::uint64_t total_remote_bytes() const;
    std::uint64_t digest() const;  // workload identity, used to pair runs
};

// (P - P_local) * (E / P): transfers one PE pushes through its proxy channel
// per dispatch. E must divide evenly across PEs.
std::int64_t remote_transfer_count(std::int64_t experts, std::int64_t pes, std::int64_t pes_per_node);

// Balanced per-expert payload: (S*k/E) * H * 2 bytes (BF16).
std::uint64_t message_size(std::uint64_t tokens, std::int64_t top_k, std::int64_t experts,
                           std::int64_t hidden_dim);

// Zipf-skewed token routing: every token draws k distinct experts from a
// rank-frequency distribution p(r) ~ r^-s over a seeded random expert
// ranking. Returns per-expert token-assignment counts summing to S*k.
std::vector<std::uint64_t> zipf_route(std::uint64_t tokens, std::int64_t experts, double exponent,
                                      std::int64_t top_k, std::uint64_t seed);

DispatchWorkload build_dispatch(const ModelConfig& model, const ClusterConfig& cluster,
                                std::uint64_t tokens, double skew, std::uint64_t tile_bytes,
                                std::uint64_t seed);

enum class MicrobenchMode : std::uint8_t { PutOnly, Coupled, Perseus };

// Synthetic fence-cost microbenchmark: each PE issues `concurrency` transfers
// of fixed size, destinations round-robin over remote PEs, no compute.
DispatchWorkload microbenchmark_workload(std::int64_t concurrency, std::uint64_t size_bytes,
                                         int nodes, int gpus_per_node, MicrobenchMode mode,
                                         int num_qps = 1);

}  // namespace sigsim
