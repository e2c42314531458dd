// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "sigsim/metrics.hpp"
#include "sigsim/protocols.hpp"

using namespace sigsim;

TEST_CASE("fit recovers an exact line") {
    std::vector<std::pair<double, double>> pts;
    for (double m : {100.0, 500.0, 2000.0, 9000.0}) pts.emplace_back(m, 2000.0 + 0.5 * m);
    AlphaBetaFit fit = fit_alpha_beta(pts);
    CHECK(fit.alpha_ns == doctest::Approx(2000.0).epsilon(1e-12));
    CHECK(fit.beta_ns_per_byte == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit on constant T: beta 0, alpha mean") {
    std::vector<std::pair<double, double>> pts = {{10, 7}, {20, 7}, {30, 7}};
    AlphaBetaFit fit = fit_alpha_beta(pts);
    CHECK(fit.beta_ns_per_byte == doctest::Approx(0.0));
    CHECK(fit.alpha_ns == doctest::Approx(7.0));
    CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("degenerate fits are errors") {
    CHECK_THROWS_AS(fit_alpha_beta({{10, 1}}), ConfigError);
    CHECK_THROWS_AS(fit_alpha_beta({{10, 1}, {10, 2}, {10, 3}}), ConfigError);
}

TEST_CASE("signaling_efficiency: identical traces give 1.0, mismatched workloads throw") {
    DispatchWorkload wl = microbenchmark_workload(4, 4096, 2, 1, MicrobenchMode::Coupled);
    RunTrace a = run_dispatch(vanilla_protocol(), wl, LatencyModel{}, 1);
    CHECK(signaling_efficiency(a, a) == doctest::Approx(1.0));
    DispatchWorkload other = microbenchmark_workload(5, 4096, 2, 1, MicrobenchMode::Coupled);
    RunTrace b = run_dispatch(vanilla_protocol(), other, LatencyModel{}, 1);
    CHECK_THROWS_AS(signaling_efficiency(a, b), ConfigError);
}

TEST_CASE("efficiency is bounded by 1 against the put-only twin") {
    for (int nodes : {2, 4}) {
        DispatchWorkload coupled_wl = microbenchmark_workload(16, 65536, nodes, 4, MicrobenchMode::Coupled);
        DispatchWorkload put_wl = microbenchmark_workload(16, 65536, nodes, 4, MicrobenchMode::PutOnly);
        put_wl.put_only = true;
        RunTrace put = run_dispatch(vanilla_protocol(), put_wl, LatencyModel{}, 1);
        for (const auto& proto : {vanilla_protocol(), combined_protocol(0)}) {
            RunTrace t = run_dispatch(proto, coupled_wl, LatencyModel{}, 1);
            CHECK(signaling_efficiency(t, put) <= 1.0);
        }
    }
}

TEST_CASE("decomposition components sum exactly and vanish on identical runs") {
    DispatchWorkload wl = microbenchmark_workload(8, 4096, 2, 4, MicrobenchMode::Coupled);
    LatencyModel lat;
    RunTrace coupled = run_dispatch(vanilla_protocol(), wl, lat, 1);
    RunTrace gs1 = run_dispatch(decoupled_protocol(1), wl, lat, 1);
    RunTrace knee = run_dispatch(decoupled_protocol(0), wl, lat, 1);
    RunTrace combined = run_dispatch(combined_protocol(0), wl, lat, 1);
    SpeedupDecomposition d = speedup_decomposition(coupled, gs1, knee, combined);
    CHECK(d.submission_reordering + d.fence_count_reduction + d.nic_side_ordering == d.total);

    SpeedupDecomposition zero = speedup_decomposition(coupled, coupled, coupled, coupled);
    CHECK(zero.total == 0);
    CHECK(zero.submission_reordering == 0);
    CHECK(zero.fence_count_reduction == 0);
    CHECK(zero.nic_side_ordering == 0);
}

TEST_CASE("verify_ordering flags the multi-QP hazard and clears peer-hash") {
    DispatchWorkload wl = microbenchmark_workload(1, 4u << 20, 2, 1, MicrobenchMode::Coupled, 2);
    LatencyModel lat;
    ProtocolConfig unsafe = nic_ordering_protocol();
    unsafe.qp_policy = QpPolicy::RoundRobin;
    CHECK(unsafe.unsafe_combination());
    RunTrace bad = run_dispatch(unsafe, wl, lat, 1);
    CHECK(verify_ordering(bad).size() >= 1);

    ProtocolConfig safe = nic_ordering_protocol();
    RunTrace good = run_dispatch(safe, wl, lat, 1);
    CHECK(verify_ordering(good).empty());
}

TEST_CASE("conservation passes on a healthy trace and names a dropped put") {
    DispatchWorkload wl = microbenchmark_workload(6, 4096, 2, 2, MicrobenchMode::Coupled);
    RunTrace trace = run_dispatch(vanilla_protocol(), wl, LatencyModel{}, 1);
    CHECK(conservation_check(trace, wl).pass);

    // corrupt: drop one put completion
    RunTrace broken = trace;
    for (std::size_t i = 0; i < broken.records.size(); ++i) {
        const auto& r = broken.records[i];
        if (r.kind == TraceKind::Completion && r.req_kind == ReqKind::Put) {
            broken.records.erase(broken.records.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    ConservationReport rep = conservation_check(broken, wl);
    CHECK(!rep.pass);
    bool names_put = false;
    for (const auto& f : rep.failures) names_put = names_put || f.find("tile") != std::string::npos;
    CHECK(names_put);
}

TEST_CASE("fence accounting rejects unmatched block markers") {
    RunTrace t;
    TraceRecord r;
    r.kind = TraceKind::ProxyBlockBegin;
    r.req_kind = ReqKind::FenceMarker;
    t.add(r);
    CHECK_THROWS_AS(fence_accounting(t), TraceError);
}

TEST_CASE("trace serialization round-trips deterministically") {
    DispatchWorkload wl = microbenchmark_workload(3, 4096, 2, 1, MicrobenchMode::Coupled);
    RunTrace a = run_dispatch(vanilla_protocol(), wl, LatencyModel{}, 2, 17);
    std::string s1 = serialize_trace(a);
    std::string s2 = serialize_trace(a);
    CHECK(s1 == s2);
    CHECK(s1.find("# trace v1") == 0);
}
