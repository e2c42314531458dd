// SPDX-License-Identifier: Apache-2.0
#include "sigsim/runner.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace sigsim {

namespace fs = std::filesystem;

void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
    }
    fs::rename(tmp, target);
}

std::string csv_header(std::uint64_t sweep_hash) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# schema=1 sweep_hash=%016llx\n",
                  (unsigned long long)sweep_hash);
    return std::string(buf) +
           "protocol,nodes,gpus_per_node,tokens,concurrency,message_bytes,skew,group_size,seed,"
           "config_hash,makespan_ns,total_bytes,fence_count,proxy_stops,proxy_blocked_ns,"
           "nic_stalls,nic_stall_ns,flagged_signals,violations,efficiency\n";
}

std::string csv_row(const SummaryRow& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%d,%llu,%lld,%llu,%.6g,%lld,%llu,%016llx,%lld,%llu,%lld,%lld,%lld,%lld,"
                  "%lld,%lld,%lld,",
                  r.protocol.c_str(), r.nodes, r.gpus_per_node, (unsigned long long)r.tokens,
                  (long long)r.concurrency, (unsigned long long)r.message_bytes, r.skew,
                  (long long)r.group_size, (unsigned long long)r.seed,
                  (unsigned long long)r.config_hash, (long long)r.makespan_ns,
                  (unsigned long long)r.total_bytes, (long long)r.fence_count,
                  (long long)r.proxy_stops, (long long)r.proxy_blocked_ns, (long long)r.nic_stalls,
                  (long long)r.nic_stall_ns, (long long)r.flagged_signals, (long long)r.violations);
    std::string line(buf);
    if (r.efficiency >= 0.0) {
        std::snprintf(buf, sizeof(buf), "%.8g", r.efficiency);
        line += buf;
    }
    line += "\n";
    return line;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

SummaryRow parse_row(const std::string& line) {
    auto f = split_csv(line);
    if (f.size() < 19) throw ConfigError("malformed summary row: " + line);
    SummaryRow r;
    std::size_t i = 0;
    r.protocol = f[i++];
    r.nodes = std::stoi(f[i++]);
    r.gpus_per_node = std::stoi(f[i++]);
    r.tokens = std::stoull(f[i++]);
    r.concurrency = std::stoll(f[i++]);
    r.message_bytes = std::stoull(f[i++]);
    r.skew = std::stod(f[i++]);
    r.group_size = std::stoll(f[i++]);
    r.seed = std::stoull(f[i++]);
    r.config_hash = std::stoull(f[i++], nullptr, 16);
    r.makespan_ns = std::stoll(f[i++]);
    r.total_bytes = std::stoull(f[i++]);
    r.fence_count = std::stoll(f[i++]);
    r.proxy_stops = std::stoll(f[i++]);
    r.proxy_blocked_ns = std::stoll(f[i++]);
    r.nic_stalls = std::stoll(f[i++]);
    r.nic_stall_ns = std::stoll(f[i++]);
    r.flagged_signals = std::stoll(f[i++]);
    r.violations = std::stoll(f[i++]);
    if (i < f.size() && !f[i].empty()) r.efficiency = std::stod(f[i]);
    return r;
}

}  // namespace

RunResult run_single(const ExperimentConfig& cfg) {
    DispatchWorkload wl = cfg.build_workload();
    RunTrace trace = run_dispatch(cfg.protocol, wl, cfg.latency, cfg.seed, cfg.config_hash());
    FenceAccounting acc = fence_accounting(trace);
    auto violations = verify_ordering(trace);

    SummaryRow row;
    row.protocol = cfg.put_only ? "put_only" : cfg.protocol.mode_name();
    row.nodes = cfg.cluster.nodes;
    row.gpus_per_node = cfg.cluster.gpus_per_node;
    row.tokens = cfg.microbench ? 0 : cfg.tokens_per_pe;
    row.concurrency = cfg.microbench ? cfg.microbench->concurrency : 0;
    row.message_bytes = cfg.microbench
                            ? cfg.microbench->message_bytes
                            : message_size(cfg.tokens_per_pe, cfg.model.top_k, cfg.model.experts,
                                           cfg.model.hidden_dim);
    row.skew = cfg.skew;
    row.group_size = cfg.protocol.group_size;
    row.seed = cfg.seed;
    row.config_hash = cfg.config_hash();
    row.makespan_ns = trace.makespan;
    row.total_bytes = trace.total_put_bytes_submitted;
    row.fence_count = acc.fence_count;
    row.proxy_stops = acc.proxy_stop_episodes;
    row.proxy_blocked_ns = acc.proxy_blocked_total;
    row.nic_stalls = acc.nic_stall_episodes;
    row.nic_stall_ns = acc.nic_stall_total;
    row.flagged_signals = acc.flagged_signal_count;
    row.violations = static_cast<std::int64_t>(violations.size());
    return RunResult{row, std::move(trace)};
}

namespace {

struct GridPoint {
    ExperimentConfig cfg;
    std::string protocol_name;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& base) {
    std::vector<std::string> protocols = base.sweep_protocols;
    if (protocols.empty()) protocols = {base.put_only ? "put_only" : base.protocol.mode_name()};
    std::vector<int> nodes = base.sweep_nodes.empty() ? std::vector<int>{base.cluster.nodes}
                                                      : base.sweep_nodes;
    std::vector<std::int64_t> group_sizes =
        base.sweep_group_size.empty() ? std::vector<std::int64_t>{base.protocol.group_size}
                                      : base.sweep_group_size;

    std::vector<GridPoint> grid;
    auto emit = [&](ExperimentConfig cfg) {
        for (const auto& proto : protocols) {
            for (std::int64_t gs : group_sizes) {
                GridPoint p;
                p.cfg = cfg;
                bool put_only = false;
                p.cfg.protocol = protocol_by_name(proto, gs, &put_only);
                // keep transport knobs the sweep is meant to hold fixed
                p.cfg.protocol.qp_policy = cfg.protocol.qp_policy;
                p.cfg.protocol.fence_waits_all = cfg.protocol.fence_waits_all;
                p.cfg.protocol.leader_wait_blocks_slot = cfg.protocol.leader_wait_blocks_slot;
                p.cfg.put_only = put_only;
                p.protocol_name = proto;
                grid.push_back(std::move(p));
            }
        }
    };

    bool micro = base.microbench.has_value() || !base.sweep_concurrency.empty() ||
                 !base.sweep_message_bytes.empty();
    for (int n : nodes) {
        ExperimentConfig cfg = base;
        cfg.cluster.nodes = n;
        if (micro) {
            MicrobenchConfig mb = base.microbench.value_or(MicrobenchConfig{});
            auto ns = base.sweep_concurrency.empty() ? std::vector<std::int64_t>{mb.concurrency}
                                                     : base.sweep_concurrency;
            auto sizes = base.sweep_message_bytes.empty()
                             ? std::vector<std::uint64_t>{mb.message_bytes}
                             : base.sweep_message_bytes;
            for (std::int64_t c : ns) {
                for (std::uint64_t s : sizes) {
                    cfg.microbench = MicrobenchConfig{c, s};
                    emit(cfg);
                }
            }
        } else {
            auto tokens = base.sweep_tokens.empty() ? std::vector<std::uint64_t>{base.tokens_per_pe}
                                                    : base.sweep_tokens;
            for (std::uint64_t t : tokens) {
                cfg.tokens_per_pe = t;
                emit(cfg);
            }
        }
    }
    return grid;
}

std::string point_key(const SummaryRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d/%d/%llu/%lld/%llu/%.6g/%llu", r.nodes, r.gpus_per_node,
                  (unsigned long long)r.tokens, (long long)r.concurrency,
                  (unsigned long long)r.message_bytes, r.skew, (unsigned long long)r.seed);
    return buf;
}

}  // namespace

std::vector<SummaryRow> cmd_sweep(const ExperimentConfig& cfg, const SweepOptions& opt,
                                  const std::string& csv_path) {
    std::vector<GridPoint> grid = expand_grid(cfg);
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    std::vector<SummaryRow> rows(grid.size());

    fs::path points_dir = fs::path(cfg.out_dir) / "points";
    fs::create_directories(points_dir);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            const GridPoint& p = grid[i];
            char name[64];
            std::snprintf(name, sizeof(name), "%016llx.csv",
                          (unsigned long long)p.cfg.config_hash());
            fs::path point_file = points_dir / name;
            if (!opt.force && fs::exists(point_file)) {
                std::ifstream in(point_file);
                std::string line;
                std::getline(in, line);
                rows[i] = parse_row(line);
                continue;
            }
            RunResult res = run_single(p.cfg);
            rows[i] = res.row;
            write_file_atomic(point_file.string(), csv_row(res.row));
            if (opt.emit_traces) {
                std::snprintf(name, sizeof(name), "%016llx.trace",
                              (unsigned long long)p.cfg.config_hash());
                write_file_atomic((fs::path(cfg.out_dir) / "traces" / name).string(),
                                  serialize_trace(res.trace));
            }
        }
    };

    int jobs = std::max(1, opt.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // attach efficiency where a put-only twin ran at the same grid point
    std::map<std::string, TimeNs> put_only_makespan;
    for (const auto& r : rows) {
        if (r.protocol == "put_only") put_only_makespan[point_key(r)] = r.makespan_ns;
    }
    for (auto& r : rows) {
        if (r.protocol == "put_only") continue;
        auto it = put_only_makespan.find(point_key(r));
        if (it != put_only_makespan.end() && r.makespan_ns > 0) {
            r.efficiency = static_cast<double>(it->second) / static_cast<double>(r.makespan_ns);
        }
    }

    std::string csv = csv_header(cfg.config_hash());
    for (const auto& r : rows) csv += csv_row(r);
    write_file_atomic(csv_path, csv);

    // narrow companion file for external plotting tools
    std::string narrow = "# schema=1\nconfig_hash,metric,value\n";
    char buf[160];
    for (const auto& r : rows) {
        auto emit = [&](const char* metric, double value) {
            std::snprintf(buf, sizeof(buf), "%016llx,%s,%.9g\n", (unsigned long long)r.config_hash,
                          metric, value);
            narrow += buf;
        };
        emit("makespan_ns", static_cast<double>(r.makespan_ns));
        emit("fence_count", static_cast<double>(r.fence_count));
        emit("proxy_blocked_ns", static_cast<double>(r.proxy_blocked_ns));
        emit("nic_stall_ns", static_cast<double>(r.nic_stall_ns));
        emit("flagged_signals", static_cast<double>(r.flagged_signals));
        emit("violations", static_cast<double>(r.violations));
        if (r.efficiency >= 0.0) emit("efficiency", r.efficiency);
    }
    fs::path metrics_path = fs::path(csv_path).parent_path() / "metrics.csv";
    write_file_atomic(metrics_path.string(), narrow);
    return rows;
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& csv_path) {
    struct Mode {
        const char* name;
        ProtocolConfig proto;
        const char* cost_class;
    };
    std::int64_t gs = cfg.protocol.group_size;
    const Mode modes[] = {
        {"vanilla", vanilla_protocol(), "drain"},
        {"nic_ordering", nic_ordering_protocol(), "flag"},
        {"decoupled", decoupled_protocol(gs), "drain"},
        {"combined", combined_protocol(gs), "flag"},
    };
    std::vector<AblationRow> out;
    TimeNs vanilla_ms = 0;
    for (const Mode& m : modes) {
        ExperimentConfig c = cfg;
        c.protocol = m.proto;
        c.protocol.qp_policy = cfg.protocol.qp_policy;
        c.put_only = false;
        RunResult res = run_single(c);
        AblationRow row;
        row.mode = m.name;
        row.fence_count = res.row.fence_count;
        row.per_fence_cost = m.cost_class;
        row.makespan_ns = res.row.makespan_ns;
        if (std::string(m.name) == "vanilla") vanilla_ms = row.makespan_ns;
        row.speedup_over_vanilla =
            row.makespan_ns > 0 ? static_cast<double>(vanilla_ms) / row.makespan_ns : 1.0;
        out.push_back(row);
    }
    if (!csv_path.empty()) {
        std::string csv = "# schema=1 ablation\nmode,fence_count,per_fence_cost,makespan_ns,speedup\n";
        char buf[196];
        for (const auto& r : out) {
            std::snprintf(buf, sizeof(buf), "%s,%lld,%s,%lld,%.4f\n", r.mode.c_str(),
                          (long long)r.fence_count, r.per_fence_cost.c_str(),
                          (long long)r.makespan_ns, r.speedup_over_vanilla);
            csv += buf;
        }
        write_file_atomic(csv_path, csv);
    }
    return out;
}

VerifyOutcome cmd_verify(const ExperimentConfig& cfg, std::int64_t trials, bool inject_fence_fault) {
    if (trials < 1) throw ConfigError("verify: trials must be >= 1");
    VerifyOutcome out;
    SeededRng rng(cfg.seed);

    if (inject_fence_fault) {
        // checker-sensitivity demonstration: vanilla with its fences dropped
        // must be caught by verify_ordering
        out.fault_injected = true;
        for (std::int64_t t = 0; t < trials; ++t) {
            ExperimentConfig c = cfg;
            c.cluster.nodes = 2;
            c.cluster.gpus_per_node = 1 + static_cast<int>(rng.next_below(2));
            c.cluster.num_qps = 2 + static_cast<int>(rng.next_below(3));
            c.model.name = "verify";
            c.model.hidden_dim = 256 << rng.next_below(3);
            c.model.intermediate_dim = c.model.hidden_dim;
            std::int64_t P = c.cluster.total_pes();
            c.model.experts = P * static_cast<std::int64_t>(1 + rng.next_below(4));
            c.model.top_k = 1 + static_cast<std::int64_t>(rng.next_below(
                                    static_cast<std::uint64_t>(std::min<std::int64_t>(4, c.model.experts))));
            c.model.compute_intensity = 0.0;
            c.tokens_per_pe = static_cast<std::uint64_t>(c.model.experts) * (1 + rng.next_below(2));
            c.skew = 0.0;
            c.model_set = c.cluster_set = true;
            c.microbench.reset();
            c.seed = rng.next_u64();
            c.protocol = vanilla_protocol();
            c.protocol.qp_policy = QpPolicy::RoundRobin;
            c.protocol.suppress_fences = true;
            c.put_only = false;
            RunResult res = run_single(c);
            out.fault_trials += 1;
            if (res.row.violations > 0) out.fault_trials_with_violations += 1;
        }
        return out;
    }

    const ProtocolConfig safe_modes[] = {
        vanilla_protocol(),          // PeerHash
        [] {                         // vanilla on round-robin QPs: drains order everything
            ProtocolConfig p = vanilla_protocol();
            p.qp_policy = QpPolicy::RoundRobin;
            return p;
        }(),
        decoupled_protocol(0),
        nic_ordering_protocol(),
        combined_protocol(0),
        gpu_direct_protocol(Signaling::Coupled),
        gpu_direct_protocol(Signaling::Decoupled),
    };

    for (std::int64_t t = 0; t < trials; ++t) {
        ExperimentConfig c = cfg;
        c.cluster.nodes = 2 + static_cast<int>(rng.next_below(3));
        c.cluster.gpus_per_node = 1 + static_cast<int>(rng.next_below(2));
        c.cluster.num_qps = 1 + static_cast<int>(rng.next_below(4));
        c.model.name = "verify";
        c.model.hidden_dim = 64 << rng.next_below(4);
        c.model.intermediate_dim = c.model.hidden_dim;
        std::int64_t P = c.cluster.total_pes();
        c.model.experts = P * static_cast<std::int64_t>(1 + rng.next_below(4));
        c.model.top_k = 1 + static_cast<std::int64_t>(rng.next_below(
                                static_cast<std::uint64_t>(std::min<std::int64_t>(4, c.model.experts))));
        c.model.compute_intensity = 0.0;
        c.model_set = c.cluster_set = true;
        c.microbench.reset();
        bool balanced = rng.next_below(2) == 0;
        if (balanced) {
            c.skew = 0.0;
            c.tokens_per_pe = static_cast<std::uint64_t>(c.model.experts) * (1 + rng.next_below(3));
        } else {
            c.skew = 0.5 + 0.5 * static_cast<double>(rng.next_below(3));
            c.tokens_per_pe = 16 + rng.next_below(240);
        }
        c.tile_bytes = rng.next_below(2) == 0 ? 0 : 4096;
        c.seed = rng.next_u64();
        c.protocol = safe_modes[t % (sizeof(safe_modes) / sizeof(safe_modes[0]))];
        c.put_only = false;
        RunResult res = run_single(c);
        out.safe_trials += 1;
        out.safe_violations += res.row.violations;
        if (res.row.violations > 0) {
            out.notes.push_back("trial " + std::to_string(t) + " (" + c.protocol.mode_name() +
                                ") produced " + std::to_string(res.row.violations) + " violations");
        }
    }

    // the multi-QP hazard: round-robin spreads a put and its flagged signal
    // across QPs, and the per-QP fence flag no longer orders them
    {
        ExperimentConfig c = cfg;
        c.cluster = ClusterConfig{2, 1, 2};
        c.cluster_set = true;
        c.microbench = MicrobenchConfig{1, 4u << 20};
        c.protocol = nic_ordering_protocol();
        c.protocol.qp_policy = QpPolicy::RoundRobin;
        c.put_only = false;
        RunResult res = run_single(c);
        out.unsafe_violations = res.row.violations;
        c.protocol.qp_policy = QpPolicy::PeerHash;
        RunResult safe = run_single(c);
        if (safe.row.violations != 0) {
            out.notes.push_back("peer-hash variant of the hazard scenario unexpectedly violated");
            out.safe_violations += safe.row.violations;
        }
    }
    return out;
}

std::vector<FitRow> cmd_fit_csv(const std::string& csv_in, const std::string& csv_out) {
    std::ifstream in(csv_in);
    if (!in) throw ConfigError("fit: cannot open '" + csv_in + "'");
    std::string line;
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header && line.rfind("protocol,", 0) == 0) {
            saw_header = true;
            continue;
        }
        SummaryRow r = parse_row(line);
        std::string key = r.protocol + "/" + std::to_string(r.nodes) + "n";
        groups[key].emplace_back(static_cast<double>(r.message_bytes),
                                 static_cast<double>(r.makespan_ns));
    }
    std::vector<FitRow> out;
    for (auto& [key, pts] : groups) {
        FitRow row;
        row.group = key;
        row.points = static_cast<int>(pts.size());
        try {
            row.fit = fit_alpha_beta(pts);
        } catch (const ConfigError& e) {
            row.error = true;
            row.error_text = e.what();
        }
        out.push_back(row);
    }
    if (!csv_out.empty()) {
        std::string csv = "# schema=1 alpha_beta\ngroup,points,alpha_ns,beta_ns_per_byte,r_squared,error\n";
        char buf[256];
        for (const auto& r : out) {
            if (r.error) {
                std::snprintf(buf, sizeof(buf), "%s,%d,,,,fit_error\n", r.group.c_str(), r.points);
            } else {
                std::snprintf(buf, sizeof(buf), "%s,%d,%.3f,%.6f,%.6f,\n", r.group.c_str(),
                              r.points, r.fit.alpha_ns, r.fit.beta_ns_per_byte, r.fit.r_squared);
            }
            csv += buf;
        }
        write_file_atomic(csv_out, csv);
    }
    return out;
}

}  // namespace sigsim
