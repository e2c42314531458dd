// SPDX-License-Identifier: Apache-2.0
#include "sigsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sigsim/trace.hpp"

namespace sigsim {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

Signaling parse_signaling(const std::string& s) {
    if (s == "coupled") return Signaling::Coupled;
    if (s == "decoupled") return Signaling::Decoupled;
    throw ConfigError("config: unknown signaling '" + s + "'");
}

OrderingMode parse_ordering(const std::string& s) {
    if (s == "proxy_fence") return OrderingMode::ProxyFence;
    if (s == "nic_fence") return OrderingMode::NicFence;
    throw ConfigError("config: unknown ordering '" + s + "'");
}

TransportPath parse_transport(const std::string& s) {
    if (s == "proxy") return TransportPath::Proxy;
    if (s == "gpu_direct") return TransportPath::GpuDirect;
    throw ConfigError("config: unknown transport '" + s + "'");
}

QpPolicy parse_policy(const std::string& s) {
    if (s == "peer_hash") return QpPolicy::PeerHash;
    if (s == "round_robin") return QpPolicy::RoundRobin;
    throw ConfigError("config: unknown qp_policy '" + s + "'");
}

}  // namespace

ProtocolConfig protocol_by_name(const std::string& name, std::int64_t group_size,
                                bool* wants_put_only) {
    if (wants_put_only) *wants_put_only = false;
    if (name == "vanilla") return vanilla_protocol();
    if (name == "decoupled") return decoupled_protocol(group_size);
    if (name == "nic_ordering") return nic_ordering_protocol();
    if (name == "combined" || name == "perseus") return combined_protocol(group_size);
    if (name == "gpu_direct") return gpu_direct_protocol(Signaling::Coupled);
    if (name == "gpu_direct_decoupled") return gpu_direct_protocol(Signaling::Decoupled);
    if (name == "put_only") {
        if (wants_put_only) *wants_put_only = true;
        return vanilla_protocol();
    }
    throw ConfigError("config: unknown protocol mode '" + name + "'");
}

LatencyModel latency_preset(const std::string& name) {
    if (name == "slingshot-like") return LatencyModel{};
    throw ConfigError("config: unknown latency preset '" + name + "'");
}

ExperimentConfig parse_config_text(const std::string& json_text) {
    json root = json::parse(json_text);
    require_keys(root, "root",
                 {"protocol", "workload", "latency", "seed", "out_dir", "sweep"});
    ExperimentConfig cfg;

    if (root.contains("protocol")) {
        const json& p = root["protocol"];
        require_keys(p, "protocol",
                     {"mode", "signaling", "ordering", "transport", "qp_policy", "group_size",
                      "fence_waits_all", "leader_wait_blocks_slot"});
        if (p.contains("mode")) {
            bool put_only = false;
            cfg.protocol = protocol_by_name(p["mode"].get<std::string>(),
                                            p.value("group_size", std::int64_t{0}), &put_only);
            cfg.put_only = put_only;
        }
        if (p.contains("signaling")) cfg.protocol.signaling = parse_signaling(p["signaling"]);
        if (p.contains("ordering")) cfg.protocol.ordering = parse_ordering(p["ordering"]);
        if (p.contains("transport")) cfg.protocol.transport = parse_transport(p["transport"]);
        if (p.contains("qp_policy")) cfg.protocol.qp_policy = parse_policy(p["qp_policy"]);
        if (p.contains("group_size")) cfg.protocol.group_size = p["group_size"].get<std::int64_t>();
        if (p.contains("fence_waits_all")) cfg.protocol.fence_waits_all = p["fence_waits_all"];
        if (p.contains("leader_wait_blocks_slot"))
            cfg.protocol.leader_wait_blocks_slot = p["leader_wait_blocks_slot"];
    }

    if (root.contains("workload")) {
        const json& w = root["workload"];
        require_keys(w, "workload",
                     {"model", "cluster", "tokens_per_pe", "skew", "tile_bytes", "put_only",
                      "microbenchmark"});
        if (w.contains("model")) {
            if (w["model"].is_string()) {
                auto preset = model_preset(w["model"].get<std::string>());
                if (!preset) {
                    throw ConfigError("config: unknown model preset '" +
                                      w["model"].get<std::string>() + "'");
                }
                cfg.model = *preset;
            } else {
                const json& m = w["model"];
                require_keys(m, "workload.model",
                             {"name", "hidden_dim", "intermediate_dim", "experts", "top_k",
                              "compute_intensity"});
                cfg.model.name = m.value("name", std::string("custom"));
                cfg.model.hidden_dim = m.value("hidden_dim", std::int64_t{0});
                cfg.model.intermediate_dim = m.value("intermediate_dim", std::int64_t{0});
                cfg.model.experts = m.value("experts", std::int64_t{0});
                cfg.model.top_k = m.value("top_k", std::int64_t{0});
                cfg.model.compute_intensity = m.value("compute_intensity", 0.0);
            }
            cfg.model_set = true;
        }
        if (w.contains("cluster")) {
            const json& c = w["cluster"];
            require_keys(c, "workload.cluster", {"nodes", "gpus_per_node", "num_qps"});
            cfg.cluster.nodes = c.value("nodes", 1);
            cfg.cluster.gpus_per_node = c.value("gpus_per_node", 4);
            cfg.cluster.num_qps = c.value("num_qps", 1);
            cfg.cluster_set = true;
        }
        if (w.contains("tokens_per_pe")) cfg.tokens_per_pe = w["tokens_per_pe"].get<std::uint64_t>();
        if (w.contains("skew")) cfg.skew = w["skew"].get<double>();
        if (w.contains("tile_bytes")) cfg.tile_bytes = w["tile_bytes"].get<std::uint64_t>();
        if (w.contains("put_only")) cfg.put_only = w["put_only"].get<bool>();
        if (w.contains("microbenchmark")) {
            const json& m = w["microbenchmark"];
            require_keys(m, "workload.microbenchmark", {"concurrency", "message_bytes"});
            MicrobenchConfig mb;
            mb.concurrency = m.value("concurrency", std::int64_t{96});
            mb.message_bytes = m.value("message_bytes", std::uint64_t{4096});
            cfg.microbench = mb;
        }
    }

    if (root.contains("latency")) {
        const json& l = root["latency"];
        require_keys(l, "latency",
                     {"preset", "base_rtt_ns", "bandwidth_bytes_per_ns", "completion_tail_coeff",
                      "per_request_nic_service_ns", "proxy_poll_quantum_ns", "issue_cost_ns",
                      "issue_jitter_ns", "gpu_direct_issue_cost_ns", "nvlink_latency_ns",
                      "signal_bytes", "processors_per_pe", "slot_tflops"});
        if (l.contains("preset")) cfg.latency = latency_preset(l["preset"].get<std::string>());
        if (l.contains("base_rtt_ns")) cfg.latency.base_rtt_ns = l["base_rtt_ns"].get<TimeNs>();
        if (l.contains("bandwidth_bytes_per_ns"))
            cfg.latency.bandwidth_bytes_per_ns = l["bandwidth_bytes_per_ns"].get<double>();
        if (l.contains("completion_tail_coeff"))
            cfg.latency.completion_tail_coeff = l["completion_tail_coeff"].get<double>();
        if (l.contains("per_request_nic_service_ns"))
            cfg.latency.per_request_nic_service_ns = l["per_request_nic_service_ns"].get<TimeNs>();
        if (l.contains("proxy_poll_quantum_ns"))
            cfg.latency.proxy_poll_quantum_ns = l["proxy_poll_quantum_ns"].get<TimeNs>();
        if (l.contains("issue_cost_ns")) cfg.latency.issue_cost_ns = l["issue_cost_ns"].get<TimeNs>();
        if (l.contains("issue_jitter_ns"))
            cfg.latency.issue_jitter_ns = l["issue_jitter_ns"].get<TimeNs>();
        if (l.contains("gpu_direct_issue_cost_ns"))
            cfg.latency.gpu_direct_issue_cost_ns = l["gpu_direct_issue_cost_ns"].get<TimeNs>();
        if (l.contains("nvlink_latency_ns"))
            cfg.latency.nvlink_latency_ns = l["nvlink_latency_ns"].get<TimeNs>();
        if (l.contains("signal_bytes")) cfg.latency.signal_bytes = l["signal_bytes"].get<std::uint64_t>();
        if (l.contains("processors_per_pe"))
            cfg.latency.processors_per_pe = l["processors_per_pe"].get<int>();
        if (l.contains("slot_tflops")) cfg.latency.slot_tflops = l["slot_tflops"].get<double>();
    }

    if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("out_dir")) cfg.out_dir = root["out_dir"].get<std::string>();

    if (root.contains("sweep")) {
        const json& s = root["sweep"];
        require_keys(s, "sweep",
                     {"tokens_per_pe", "concurrency", "message_bytes", "nodes", "group_size",
                      "protocols"});
        if (s.contains("tokens_per_pe"))
            cfg.sweep_tokens = s["tokens_per_pe"].get<std::vector<std::uint64_t>>();
        if (s.contains("concurrency"))
            cfg.sweep_concurrency = s["concurrency"].get<std::vector<std::int64_t>>();
        if (s.contains("message_bytes"))
            cfg.sweep_message_bytes = s["message_bytes"].get<std::vector<std::uint64_t>>();
        if (s.contains("nodes")) cfg.sweep_nodes = s["nodes"].get<std::vector<int>>();
        if (s.contains("group_size"))
            cfg.sweep_group_size = s["group_size"].get<std::vector<std::int64_t>>();
        if (s.contains("protocols"))
            cfg.sweep_protocols = s["protocols"].get<std::vector<std::string>>();
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError("config: parse failure in '" + path + "': " + e.what());
    }
}

void ExperimentConfig::validate() const {
    latency.validate();
    if (!microbench) {
        if (!model_set) throw ConfigError("config: workload.model is required");
        model.validate();
    }
    if (!cluster_set) throw ConfigError("config: workload.cluster is required");
    cluster.validate();
    if (skew < 0.0) throw ConfigError("config: skew must be >= 0");
}

std::string ExperimentConfig::canonical() const {
    json j;
    j["protocol"] = {{"signaling", to_string(protocol.signaling)},
                     {"ordering", to_string(protocol.ordering)},
                     {"transport", to_string(protocol.transport)},
                     {"qp_policy", to_string(protocol.qp_policy)},
                     {"group_size", protocol.group_size},
                     {"fence_waits_all", protocol.fence_waits_all},
                     {"leader_wait_blocks_slot", protocol.leader_wait_blocks_slot}};
    j["workload"] = {{"model", model.name},
                     {"hidden_dim", model.hidden_dim},
                     {"intermediate_dim", model.intermediate_dim},
                     {"experts", model.experts},
                     {"top_k", model.top_k},
                     {"compute_intensity", model.compute_intensity},
                     {"nodes", cluster.nodes},
                     {"gpus_per_node", cluster.gpus_per_node},
                     {"num_qps", cluster.num_qps},
                     {"tokens_per_pe", tokens_per_pe},
                     {"skew", skew},
                     {"tile_bytes", tile_bytes},
                     {"put_only", put_only}};
    if (microbench) {
        j["workload"]["microbenchmark"] = {{"concurrency", microbench->concurrency},
                                           {"message_bytes", microbench->message_bytes}};
    }
    j["latency"] = {{"base_rtt_ns", latency.base_rtt_ns},
                    {"bandwidth_bytes_per_ns", latency.bandwidth_bytes_per_ns},
                    {"completion_tail_coeff", latency.completion_tail_coeff},
                    {"per_request_nic_service_ns", latency.per_request_nic_service_ns},
                    {"proxy_poll_quantum_ns", latency.proxy_poll_quantum_ns},
                    {"issue_cost_ns", latency.issue_cost_ns},
                    {"issue_jitter_ns", latency.issue_jitter_ns},
                    {"gpu_direct_issue_cost_ns", latency.gpu_direct_issue_cost_ns},
                    {"nvlink_latency_ns", latency.nvlink_latency_ns},
                    {"signal_bytes", latency.signal_bytes},
                    {"processors_per_pe", latency.processors_per_pe},
                    {"slot_tflops", latency.slot_tflops}};
    j["seed"] = seed;
    return j.dump();  // nlohmann objects iterate in sorted key order
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical()); }

DispatchWorkload ExperimentConfig::build_workload() const {
    DispatchWorkload wl;
    if (microbench) {
        wl = microbenchmark_workload(microbench->concurrency, microbench->message_bytes,
                                     cluster.nodes, cluster.gpus_per_node,
                                     put_only ? MicrobenchMode::PutOnly : MicrobenchMode::Coupled,
                                     cluster.num_qps);
    } else {
        wl = build_dispatch(model, cluster, tokens_per_pe, skew, tile_bytes, seed);
        wl.put_only = put_only;
    }
    return wl;
}

}  // namespace sigsim
