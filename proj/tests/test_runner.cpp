// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sigsim/config.hpp"
#include "sigsim/runner.hpp"

using namespace sigsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("sigsim_test_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig micro_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.cluster = ClusterConfig{2, 4, 1};
    cfg.cluster_set = true;
    cfg.microbench = MicrobenchConfig{4, 4096};
    cfg.out_dir = out_dir;
    cfg.sweep_concurrency = {1, 4};
    cfg.sweep_message_bytes = {4096, 65536};
    cfg.sweep_nodes = {2, 4};
    cfg.sweep_protocols = {"put_only", "vanilla", "combined"};
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sweep writes one row per grid point with efficiency pairing") {
    TempDir tmp;
    ExperimentConfig cfg = micro_config(tmp.path.string());
    SweepOptions opt;
    auto rows = cmd_sweep(cfg, opt, (tmp.path / "sweep.csv").string());
    CHECK(rows.size() == 2u * 2u * 2u * 3u);
    for (const auto& r : rows) {
        if (r.protocol == "put_only") continue;
        CHECK(r.efficiency > 0.0);
        CHECK(r.efficiency <= 1.0);
    }
    CHECK(fs::exists(tmp.path / "sweep.csv"));
    CHECK(fs::exists(tmp.path / "metrics.csv"));
    std::string narrow = slurp(tmp.path / "metrics.csv");
    CHECK(narrow.find("config_hash,metric,value") != std::string::npos);
    CHECK(narrow.find("makespan_ns") != std::string::npos);
}

TEST_CASE("completed grid points are reused unless forced") {
    TempDir tmp;
    ExperimentConfig cfg = micro_config(tmp.path.string());
    SweepOptions opt;
    std::string csv = (tmp.path / "sweep.csv").string();
    auto first = cmd_sweep(cfg, opt, csv);

    // poison one cached point; a non-forced rerun must pick up the cache
    fs::path points = tmp.path / "points";
    fs::directory_iterator it(points);
    fs::path victim = it->path();
    SummaryRow fake = first[0];
    std::string line = csv_row(fake);
    {
        std::ofstream out(victim, std::ios::trunc);
        out << line;
    }
    auto second = cmd_sweep(cfg, opt, csv);
    CHECK(second.size() == first.size());

    SweepOptions force;
    force.force = true;
    auto third = cmd_sweep(cfg, force, csv);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(third[i].makespan_ns == first[i].makespan_ns);
    }
}

TEST_CASE("sweep runs identically with parallel jobs") {
    TempDir tmp1, tmp2;
    ExperimentConfig a = micro_config(tmp1.path.string());
    ExperimentConfig b = micro_config(tmp2.path.string());
    SweepOptions serial;
    SweepOptions parallel;
    parallel.jobs = 4;
    auto r1 = cmd_sweep(a, serial, (tmp1.path / "s.csv").string());
    auto r2 = cmd_sweep(b, parallel, (tmp2.path / "s.csv").string());
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].makespan_ns == r2[i].makespan_ns);
        CHECK(r1[i].config_hash == r2[i].config_hash);
    }
}

TEST_CASE("ablation emits the four modes with nic-fence cost classes") {
    TempDir tmp;
    ExperimentConfig cfg;
    cfg.model = *model_preset("qwen3-30b");
    cfg.model_set = true;
    cfg.cluster = ClusterConfig{8, 4, 1};
    cfg.cluster_set = true;
    cfg.tokens_per_pe = 64;
    cfg.out_dir = tmp.path.string();
    auto rows = cmd_ablate(cfg, (tmp.path / "ablation.csv").string());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].mode == "vanilla");
    CHECK(rows[0].fence_count == 112 * 32);  // per dispatch, all 32 PEs
    CHECK(rows[1].mode == "nic_ordering");
    CHECK(rows[1].fence_count == 112 * 32);
    CHECK(rows[1].per_fence_cost == "flag");
    CHECK(rows[2].mode == "decoupled");
    CHECK(rows[2].fence_count == 28 * 32);
    CHECK(rows[2].per_fence_cost == "drain");
    CHECK(rows[3].mode == "combined");
    CHECK(rows[3].fence_count == 28 * 32);
    for (const auto& r : rows) CHECK(r.speedup_over_vanilla >= 1.0);
}

TEST_CASE("single-node ablation degenerates to unit speedups") {
    ExperimentConfig cfg;
    cfg.model = *model_preset("qwen3-30b");
    cfg.model_set = true;
    cfg.cluster = ClusterConfig{1, 4, 1};
    cfg.cluster_set = true;
    cfg.tokens_per_pe = 64;
    auto rows = cmd_ablate(cfg, "");
    for (const auto& r : rows) {
        CHECK(r.fence_count == 0);
        CHECK(r.speedup_over_vanilla == doctest::Approx(1.0));
    }
}

TEST_CASE("fit over a sweep CSV recovers linearity and flags degenerate groups") {
    TempDir tmp;
    std::string csv =
        "# schema=1 sweep_hash=0\n"
        "protocol,nodes,gpus_per_node,tokens,concurrency,message_bytes,skew,group_size,seed,"
        "config_hash,makespan_ns,total_bytes,fence_count,proxy_stops,proxy_blocked_ns,nic_stalls,"
        "nic_stall_ns,flagged_signals,violations,efficiency\n";
    for (int m : {1000, 2000, 4000}) {
        csv += "vanilla,2,4,0,8," + std::to_string(m) + ",0,0,1,0," +
               std::to_string(500 + 3 * m) + ",0,0,0,0,0,0,0,0,\n";
    }
    csv += "combined,2,4,0,8,4096,0,0,1,0,7777,0,0,0,0,0,0,0,0,\n";  // single point
    fs::path in = tmp.path / "in.csv";
    {
        std::ofstream out(in);
        out << csv;
    }
    auto fits = cmd_fit_csv(in.string(), (tmp.path / "fit.csv").string());
    REQUIRE(fits.size() == 2);
    bool saw_linear = false, saw_error = false;
    for (const auto& f : fits) {
        if (f.group == "vanilla/2n") {
            saw_linear = true;
            CHECK(f.fit.alpha_ns == doctest::Approx(500.0));
            CHECK(f.fit.beta_ns_per_byte == doctest::Approx(3.0));
            CHECK(f.fit.r_squared == doctest::Approx(1.0));
        }
        if (f.group == "combined/2n") {
            saw_error = true;
            CHECK(f.error);
        }
    }
    CHECK(saw_linear);
    CHECK(saw_error);
    CHECK(fs::exists(tmp.path / "fit.csv"));
}

TEST_CASE("verify outcome contract") {
    ExperimentConfig cfg;
    cfg.model = *model_preset("qwen3-30b");
    cfg.model_set = true;
    cfg.cluster = ClusterConfig{2, 4, 4};
    cfg.cluster_set = true;
    cfg.seed = 5;
    VerifyOutcome safe = cmd_verify(cfg, 25, false);
    CHECK(safe.ok());
    CHECK(safe.safe_violations == 0);
    CHECK(safe.unsafe_violations >= 1);
    VerifyOutcome fault = cmd_verify(cfg, 10, true);
    CHECK(!fault.ok());
    CHECK(fault.fault_trials_with_violations == 10);
}
