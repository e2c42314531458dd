// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include "doctest.h"
#include "sigsim/workload.hpp"

using namespace sigsim;

TEST_CASE("remote_transfer_count matches the concurrency formula") {
    CHECK(remote_transfer_count(128, 16, 4) == 96);
    CHECK(remote_transfer_count(128, 32, 4) == 112);
    CHECK(remote_transfer_count(128, 16, 16) == 0);
    CHECK_THROWS_AS(remote_transfer_count(100, 16, 4), ConfigError);
}

TEST_CASE("message_size: balanced per-expert payload in BF16") {
    CHECK(message_size(1024, 8, 128, 2048) == 262144);   // == 1024 * 256
    CHECK(message_size(1024, 4, 128, 2880) == 184320);   // == 1024 * 180
    CHECK(message_size(0, 8, 128, 2048) == 0);
}

TEST_CASE("zipf routing conserves token assignments at every skew") {
    for (double s : {0.0, 0.5, 1.0, 1.5}) {
        auto counts = zipf_route(1000, 64, s, 4, 7);
        std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
        CHECK(total == 4000);
    }
}

TEST_CASE("zipf with s=0 is near-uniform at large S") {
    auto counts = zipf_route(100000, 16, 0.0, 2, 11);
    double expected = 100000.0 * 2 / 16;
    for (auto c : counts) {
        CHECK(static_cast<double>(c) > expected * 0.9);
        CHECK(static_cast<double>(c) < expected * 1.1);
    }
}

TEST_CASE("zipf s=1, E=4, k=1: rank-1 expert draws ~1/H4 of tokens") {
    auto counts = zipf_route(100000, 4, 1.0, 1, 3);
    std::uint64_t top = *std::max_element(counts.begin(), counts.end());
    double share = static_cast<double>(top) / 100000.0;
    CHECK(share > 0.47);
    CHECK(share < 0.49);
}

TEST_CASE("zipf s=1.5, E=128: top-10 experts take ~82% of assignments") {
    auto counts = zipf_route(200000, 128, 1.5, 1, 5);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    std::uint64_t top10 = std::accumulate(counts.begin(), counts.begin() + 10, std::uint64_t{0});
    double share = static_cast<double>(top10) / 200000.0;
    CHECK(share > 0.79);
    CHECK(share < 0.85);
}

TEST_CASE("zipf routing is reproducible per seed") {
    auto a = zipf_route(5000, 32, 1.0, 4, 99);
    auto b = zipf_route(5000, 32, 1.0, 4, 99);
    auto c = zipf_route(5000, 32, 1.0, 4, 100);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("balanced qwen3 dispatch at 4 nodes: 96 transfers of 262144 bytes per PE") {
    auto model = *model_preset("qwen3-30b");
    ClusterConfig cluster{4, 4, 1};
    DispatchWorkload wl = build_dispatch(model, cluster, 1024, 0.0, 0, 1);
    std::size_t pe0 = 0;
    for (const auto& t : wl.remote_transfers) {
        if (t.src_pe == 0) {
            pe0 += 1;
            CHECK(t.bytes == 262144);
        }
    }
    CHECK(pe0 == 96);
    // every PE also feeds its 3 intra-node peers
    std::size_t local0 = 0;
    for (const auto& t : wl.local_transfers) local0 += t.src_pe == 0 ? 1 : 0;
    CHECK(local0 == 3 * (128 / 16));
}

TEST_CASE("tile mode splits a 262144-byte payload into 16 tiles of 16 KB") {
    auto model = *model_preset("qwen3-30b");
    ClusterConfig cluster{4, 4, 1};
    DispatchWorkload wl = build_dispatch(model, cluster, 1024, 0.0, 16384, 1);
    std::size_t pe0 = 0;
    for (const auto& t : wl.remote_transfers) {
        if (t.src_pe != 0) continue;
        pe0 += 1;
        CHECK(t.bytes == 16384);
    }
    CHECK(pe0 == 96 * 16);
}

TEST_CASE("balanced mode requires divisibility; skewed mode does not") {
    auto model = *model_preset("qwen3-30b");
    ClusterConfig cluster{4, 4, 1};
    CHECK_THROWS_AS(build_dispatch(model, cluster, 1000, 0.0, 0, 1), ConfigError);
    CHECK_NOTHROW(build_dispatch(model, cluster, 1000, 0.5, 0, 1));
}

TEST_CASE("dispatch build is deterministic for a fixed seed") {
    auto model = *model_preset("qwen3-30b");
    ClusterConfig cluster{2, 4, 1};
    DispatchWorkload a = build_dispatch(model, cluster, 256, 1.0, 0, 42);
    DispatchWorkload b = build_dispatch(model, cluster, 256, 1.0, 0, 42);
    CHECK(a.digest() == b.digest());
    DispatchWorkload c = build_dispatch(model, cluster, 256, 1.0, 0, 43);
    CHECK(a.digest() != c.digest());
}

TEST_CASE("heavy skew omits zero-sized transfers") {
    ModelConfig model{"tiny", 64, 64, 8, 1, 0.0};
    ClusterConfig cluster{2, 1, 1};
    DispatchWorkload wl = build_dispatch(model, cluster, 64, 8.0, 0, 9);
    for (const auto& t : wl.remote_transfers) CHECK(t.bytes > 0);
}

TEST_CASE("microbenchmark: destinations round-robin over remote PEs only") {
    DispatchWorkload wl = microbenchmark_workload(96, 4096, 8, 4, MicrobenchMode::Coupled);
    int per_src = 0;
    for (const auto& t : wl.remote_transfers) {
        if (t.src_pe != 0) continue;
        per_src += 1;
        CHECK(t.dst_pe >= 4);  // node 0 holds PEs 0..3
        CHECK(t.bytes == 4096);
    }
    CHECK(per_src == 96);
    CHECK(wl.local_transfers.empty());
    CHECK(microbenchmark_workload(1, 64, 2, 1, MicrobenchMode::PutOnly).put_only);
    CHECK_THROWS_AS(microbenchmark_workload(0, 64, 2, 1, MicrobenchMode::Coupled), ConfigError);
}

TEST_CASE("model presets carry the published geometry") {
    auto qwen = *model_preset("qwen3-30b");
    CHECK(qwen.hidden_dim == 2048);
    CHECK(qwen.experts == 128);
    CHECK(qwen.top_k == 8);
    auto ds = *model_preset("deepseek-v3");
    CHECK(ds.experts == 256);
    CHECK(ds.compute_intensity == 0.0);  // not published; must be user-supplied
    CHECK(!model_preset("nonexistent"));
}
