// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigsim/sim.hpp"

namespace sigsim {

enum class ReqKind : std::uint8_t { Put, Signal, FenceMarker };

enum class TraceKind : std::uint8_t {
    Submit,
    NicServiceStart,
    Completion,
    SignalVisible,
    ComputeStart,
    ComputeEnd,
    ProxyBlockBegin,
    ProxyBlockEnd,
    NicBlockBegin,
    NicBlockEnd,
};

const char* to_string(ReqKind k);
const char* to_string(TraceKind k);

/// One timestamped simulator event. `pe` is the PE whose state changed:
/// sender for submit/service/completion and proxy/NIC blocking, receiver for
/// signal visibility and compute.
struct TraceRecord {
    TimeNs time = 0;
    std::uint32_t pe = 0;
    TraceKind kind = TraceKind::Submit;
    ReqKind req_kind = ReqKind::Put;
    std::uint32_t src_pe = 0;
    std::uint32_t dst_pe = 0;
    std::uint64_t size = 0;
    bool fence_flag = false;
    std::int32_t qp = -1;
    std::int64_t group_id = -1;
    std::int64_t tile_id = -1;   // links a Signal to the Put it announces
    std::uint64_t submit_seq = 0;
};

/// Complete evidence record of one run: every submit / service / completion /
/// visibility / stall event plus run metadata.
struct RunTrace {
    std::vector<TraceRecord> records;
    std::uint64_t config_hash = 0;
    std::uint64_t workload_digest = 0;
    std::uint64_t seed = 0;
    std::uint64_t heap_digest = 0;  // final symmetric-heap contents, timing-free
    TimeNs makespan = 0;
    std::uint64_t total_put_bytes_submitted = 0;
    std::uint64_t total_put_bytes_delivered = 0;

    void add(const TraceRecord& r) { records.push_back(r); }
};

/// Newline-delimited serialization, one record per line, fixed field order.
/// Byte-identical for identical (config, seed) runs.
std::string serialize_trace(const RunTrace& trace);

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace sigsim
