// SPDX-License-Identifier: Apache-2.0
#include "sigsim/trace.hpp"

#include <cstdio>

namespace sigsim {

const char* to_string(ReqKind k) {
    switch (k) {
        case ReqKind::Put: return "put";
        case ReqKind::Signal: return "signal";
        case ReqKind::FenceMarker: return "fence";
    }
    return "?";
}

const char* to_string(TraceKind k) {
    switch (k) {
        case TraceKind::Submit: return "submit";
        case TraceKind::NicServiceStart: return "nic_service_start";
        case TraceKind::Completion: return "completion";
        case TraceKind::SignalVisible: return "signal_visible";
        case TraceKind::ComputeStart: return "compute_start";
        case TraceKind::ComputeEnd: return "compute_end";
        case TraceKind::ProxyBlockBegin: return "proxy_block_begin";
        case TraceKind::ProxyBlockEnd: return "proxy_block_end";
        case TraceKind::NicBlockBegin: return "nic_block_begin";
        case TraceKind::NicBlockEnd: return "nic_block_end";
    }
    return "?";
}

std::string serialize_trace(const RunTrace& trace) {
    std::string out;
    out.reserve(trace.records.size() * 64 + 256);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "# trace v1 config=%016llx workload=%016llx seed=%llu heap=%016llx makespan=%lld\n",
                  (unsigned long long)trace.config_hash, (unsigned long long)trace.workload_digest,
                  (unsigned long long)trace.seed, (unsigned long long)trace.heap_digest,
                  (long long)trace.makespan);
    out += buf;
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof(buf), "%lld %u %s %s %u %u %llu %d %d %lld %lld %llu\n",
                      (long long)r.time, r.pe, to_string(r.kind), to_string(r.req_kind), r.src_pe,
                      r.dst_pe, (unsigned long long)r.size, r.fence_flag ? 1 : 0, r.qp,
                      (long long)r.group_id, (long long)r.tile_id, (unsigned long long)r.submit_seq);
        out += buf;
    }
    return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s, std::uint64_t h) { return fnv1a64(s.data(), s.size(), h); }

}  // namespace sigsim
