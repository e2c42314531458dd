// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigsim/transport.hpp"
#include "sigsim/workload.hpp"

namespace sigsim {

enum class Signaling : std::uint8_t { Coupled, Decoupled };

const char* to_string(Signaling s);

/// Which of the four signaling protocols a run uses, plus transport knobs.
/// (Coupled, ProxyFence, Proxy) is the vanilla baseline; (Decoupled, NicFence,
/// Proxy) is the combined mode.
struct ProtocolConfig {
    Signaling signaling = Signaling::Coupled;
    OrderingMode ordering = OrderingMode::ProxyFence;
    TransportPath transport = TransportPath::Proxy;
    QpPolicy qp_policy = QpPolicy::PeerHash;
    std::int64_t group_size = 0;  // Decoupled only; 0 = one group per remote PE
    bool fence_waits_all = true;  // proxy fence waits on Signals too, not just Puts
    bool leader_wait_blocks_slot = true;  // a waiting leader occupies a compute slot
    bool suppress_fences = false;         // fault-injection hook for checker tests

    std::string mode_name() const;
    // RoundRobin spreads dependent operations across QPs, which NIC-side
    // fence flags do not order. Constructible on purpose; callers should warn.
    bool unsafe_combination() const {
        return ordering == OrderingMode::NicFence && qp_policy == QpPolicy::RoundRobin &&
               transport == TransportPath::Proxy;
    }
};

ProtocolConfig vanilla_protocol();
ProtocolConfig decoupled_protocol(std::int64_t group_size = 0);
ProtocolConfig nic_ordering_protocol();
ProtocolConfig combined_protocol(std::int64_t group_size = 0);
ProtocolConfig gpu_direct_protocol(Signaling signaling = Signaling::Coupled);

/// One fence's worth of transfers: the members share a single Phase-2 fence
/// and the leader issues their signals.
struct SignalGroup {
    std::int64_t group_id = -1;
    std::vector<std::size_t> members;  // indices into the source PE's transfer list
    std::size_t leader = 0;            // first member in (dst_pe, expert) order
    std::int64_t target = 0;
    std::int64_t counter = 0;
};

// Deterministic grouping over one source PE's remote transfers, sorted by
// (dst_pe, expert, tile). group_size 0 groups by destination PE; otherwise
// group_size must divide the transfer count.
std::vector<SignalGroup> assign_groups(const std::vector<TransferSpec>& transfers,
                                       std::int64_t group_size);

/// Runs one dispatch under the given protocol and returns the full trace.
RunTrace run_dispatch(const ProtocolConfig& protocol, const DispatchWorkload& workload,
                      const LatencyModel& latency, std::uint64_t seed,
                      std::uint64_t config_hash = 0);

}  // namespace sigsim
