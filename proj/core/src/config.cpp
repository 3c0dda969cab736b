#include "versenet/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "versenet/errors.hpp"
#include "versenet/hash.hpp"
#include "versenet/prompts.hpp"

namespace versenet {

using nlohmann::json;

const char* backend_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::kNgram: return "ngram";
        case BackendKind::kNeural: return "neural";
        case BackendKind::kChat: return "chat";
    }
    return "?";
}

namespace {

BackendKind backend_from_name(const std::string& name) {
    if (name == "ngram") return BackendKind::kNgram;
    if (name == "neural") return BackendKind::kNeural;
    if (name == "chat") return BackendKind::kChat;
    throw ConfigError("unknown backend: " + name);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (allowed.find(key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

ChatEndpoint parse_endpoint(const json& obj, const std::string& where) {
    check_keys(obj,
               {"base_url", "model", "credential_env", "max_retries", "backoff_seconds",
                "timeout_seconds", "temperature", "rate_limit_rps"},
               where);
    ChatEndpoint ep;
    ep.base_url = get_or<std::string>(obj, "base_url", "");
    ep.model = get_or<std::string>(obj, "model", "");
    ep.credential_env = get_or<std::string>(obj, "credential_env", "");
    ep.max_retries = get_or<int>(obj, "max_retries", ep.max_retries);
    ep.backoff_seconds = get_or<double>(obj, "backoff_seconds", ep.backoff_seconds);
    ep.timeout_seconds = get_or<double>(obj, "timeout_seconds", ep.timeout_seconds);
    ep.temperature = get_or<double>(obj, "temperature", ep.temperature);
    ep.rate_limit_rps = get_or<double>(obj, "rate_limit_rps", ep.rate_limit_rps);
    if (ep.max_retries < 0) throw ConfigError(where + ": max_retries must be >= 0");
    if (ep.timeout_seconds <= 0) throw ConfigError(where + ": timeout_seconds must be > 0");
    return ep;
}

AgentSpec parse_agent(const json& obj, const std::string& where) {
    check_keys(obj,
               {"backend", "order", "kappa", "dim", "window", "init_scale", "embed_dim",
                "endpoint", "transport"},
               where);
    AgentSpec spec;
    spec.backend = backend_from_name(get_or<std::string>(obj, "backend", "neural"));
    spec.order = get_or<int>(obj, "order", spec.order);
    spec.kappa = get_or<double>(obj, "kappa", spec.kappa);
    spec.dim = get_or<std::size_t>(obj, "dim", spec.dim);
    spec.window = get_or<std::size_t>(obj, "window", spec.window);
    spec.init_scale = get_or<double>(obj, "init_scale", spec.init_scale);
    spec.embed_dim = get_or<std::size_t>(obj, "embed_dim", spec.embed_dim);
    spec.transport = get_or<std::string>(obj, "transport", spec.transport);
    if (spec.transport != "http" && spec.transport != "mock") {
        throw ConfigError(where + ": transport must be 'http' or 'mock'");
    }
    if (obj.contains("endpoint")) spec.endpoint = parse_endpoint(obj["endpoint"], where + ".endpoint");
    if (spec.backend == BackendKind::kChat && spec.transport == "http" &&
        spec.endpoint.base_url.empty()) {
        throw ConfigError(where + ": chat backend over http needs endpoint.base_url");
    }
    return spec;
}

}  // namespace

std::string AgentSpec::signature() const {
    std::ostringstream out;
    out << backend_name(backend);
    if (backend == BackendKind::kNgram) {
        out << ":o" << order << ":k" << kappa << ":e" << embed_dim;
    } else if (backend == BackendKind::kNeural) {
        out << ":d" << dim << ":w" << window << ":s" << init_scale;
    }
    return out.str();
}

SignedNetwork ExperimentConfig::build_network() const {
    std::map<AgentId, Group> assignment;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        assignment[static_cast<AgentId>(i)] = groups[i];
    }
    return SignedNetwork::build(m(), assignment);
}

ExperimentConfig parse_config_json(const std::string& content, const std::string& origin) {
    json root = json::parse(content, nullptr, false);
    if (root.is_discarded()) throw ConfigError(origin + ": invalid JSON");
    check_keys(root,
               {"schema_version", "mode", "network", "agents", "corpus", "decode", "train",
                "prompting", "metrics", "run", "output"},
               origin);
    if (get_or<int>(root, "schema_version", 1) != 1) {
        throw SchemaVersionMismatch(origin + ": unsupported config schema version");
    }

    ExperimentConfig cfg;
    cfg.mode = get_or<std::string>(root, "mode", cfg.mode);
    if (cfg.mode != "training" && cfg.mode != "prompting" && cfg.mode != "mixed") {
        throw ConfigError("mode must be training, prompting or mixed");
    }

    if (!root.contains("network") || !root["network"].is_object()) {
        throw ConfigError(origin + ": missing 'network' object");
    }
    check_keys(root["network"], {"groups"}, "network");
    if (!root["network"].contains("groups") || !root["network"]["groups"].is_array()) {
        throw ConfigError("network.groups must be an array of group labels");
    }
    for (const auto& g : root["network"]["groups"]) {
        const std::string label = g.get<std::string>();
        if (label.size() != 1) throw ConfigError("group labels must be single letters");
        cfg.groups.push_back(group_from_name(label[0]));
    }
    if (cfg.m() < 2) throw ConfigError("network needs at least 2 agents");

    if (root.contains("agents")) {
        const auto& agents = root["agents"];
        if (agents.is_object()) {
            const AgentSpec uniform = parse_agent(agents, "agents");
            cfg.agents.assign(static_cast<std::size_t>(cfg.m()), uniform);
        } else if (agents.is_array()) {
            if (static_cast<int>(agents.size()) != cfg.m()) {
                throw ConfigError("agents array must have one entry per agent");
            }
            for (std::size_t i = 0; i < agents.size(); ++i) {
                cfg.agents.push_back(parse_agent(agents[i], "agents[" + std::to_string(i) + "]"));
            }
        } else {
            throw ConfigError("agents must be an object or an array");
        }
    } else {
        cfg.agents.assign(static_cast<std::size_t>(cfg.m()), AgentSpec{});
    }

    if (root.contains("corpus")) {
        const auto& c = root["corpus"];
        check_keys(c,
                   {"path", "dedup", "dedup_threshold", "pretrain_fraction", "subset_size",
                    "pretrain_steps", "init_epochs"},
                   "corpus");
        cfg.corpus.path = get_or<std::string>(c, "path", "");
        cfg.corpus.dedup = get_or<bool>(c, "dedup", cfg.corpus.dedup);
        cfg.corpus.dedup_threshold = get_or<double>(c, "dedup_threshold", cfg.corpus.dedup_threshold);
        cfg.corpus.pretrain_fraction =
            get_or<double>(c, "pretrain_fraction", cfg.corpus.pretrain_fraction);
        cfg.corpus.subset_size = get_or<std::size_t>(c, "subset_size", cfg.corpus.subset_size);
        cfg.corpus.pretrain_steps = get_or<int>(c, "pretrain_steps", cfg.corpus.pretrain_steps);
        cfg.corpus.init_epochs = get_or<int>(c, "init_epochs", cfg.corpus.init_epochs);
        if (cfg.corpus.pretrain_fraction <= 0.0 || cfg.corpus.pretrain_fraction > 1.0) {
            throw ConfigError("corpus.pretrain_fraction must be in (0,1]");
        }
    }

    if (root.contains("decode")) {
        const auto& d = root["decode"];
        check_keys(d, {"alpha", "n_agents", "temperature", "top_k", "top_p", "max_tokens"},
                   "decode");
        cfg.decode.alpha = get_or<double>(d, "alpha", cfg.decode.alpha);
        cfg.decode.n_agents = get_or<int>(d, "n_agents", cfg.decode.n_agents);
        cfg.decode.sampler.temperature = get_or<double>(d, "temperature", 1.0);
        cfg.decode.sampler.top_k = get_or<int>(d, "top_k", 0);
        cfg.decode.sampler.top_p = get_or<double>(d, "top_p", 0.95);
        cfg.decode.sampler.max_tokens = get_or<int>(d, "max_tokens", 48);
        if (cfg.decode.alpha < 0) throw ConfigError("decode.alpha must be >= 0");
        if (cfg.decode.n_agents < 2) throw ConfigError("decode.n_agents must be >= 2");
        if (cfg.decode.sampler.temperature <= 0) throw ConfigError("decode.temperature must be > 0");
        if (cfg.decode.sampler.top_p <= 0 || cfg.decode.sampler.top_p > 1) {
            throw ConfigError("decode.top_p must be in (0,1]");
        }
        if (cfg.decode.sampler.top_k < 0) throw ConfigError("decode.top_k must be >= 0");
    }

    if (root.contains("train")) {
        const auto& t = root["train"];
        check_keys(t,
                   {"loss_mode", "learning_rate", "epochs", "batch_size", "tau", "cl_weight",
                    "count_weight"},
                   "train");
        cfg.train.loss_mode = loss_mode_from_name(get_or<std::string>(t, "loss_mode", "ce"));
        cfg.train.learning_rate = get_or<double>(t, "learning_rate", cfg.train.learning_rate);
        cfg.train.epochs = get_or<int>(t, "epochs", cfg.train.epochs);
        cfg.train.batch_size = get_or<int>(t, "batch_size", cfg.train.batch_size);
        cfg.train.tau = get_or<double>(t, "tau", cfg.train.tau);
        cfg.train.cl_weight = get_or<double>(t, "cl_weight", cfg.train.cl_weight);
        cfg.train.count_weight = get_or<double>(t, "count_weight", cfg.train.count_weight);
        if (cfg.train.tau <= 0) throw ConfigError("train.tau must be > 0");
        if (cfg.train.learning_rate <= 0) throw ConfigError("train.learning_rate must be > 0");
        if (cfg.train.cl_weight < 0) throw ConfigError("train.cl_weight must be >= 0");
        if (cfg.train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
        if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    }

    if (root.contains("prompting")) {
        const auto& p = root["prompting"];
        check_keys(p, {"strategy"}, "prompting");
        cfg.prompt_strategy = get_or<std::string>(p, "strategy", cfg.prompt_strategy);
        strategy_from_name(cfg.prompt_strategy);  // validate
    }

    if (root.contains("metrics")) {
        const auto& m = root["metrics"];
        check_keys(m, {"max_pairs", "pooled", "embedding"}, "metrics");
        cfg.metrics.max_pairs = get_or<std::size_t>(m, "max_pairs", cfg.metrics.max_pairs);
        cfg.metrics.pooled = get_or<bool>(m, "pooled", cfg.metrics.pooled);
        if (m.contains("embedding")) {
            const auto& e = m["embedding"];
            check_keys(e, {"kind", "dimension", "seed", "base_url", "model", "credential_env",
                           "cache"},
                       "metrics.embedding");
            cfg.metrics.embedding_kind = get_or<std::string>(e, "kind", "internal");
            cfg.metrics.embedding_dim = get_or<std::size_t>(e, "dimension", cfg.metrics.embedding_dim);
            cfg.metrics.embedding_seed = get_or<std::uint64_t>(e, "seed", cfg.metrics.embedding_seed);
            cfg.metrics.embedding_endpoint.base_url = get_or<std::string>(e, "base_url", "");
            cfg.metrics.embedding_endpoint.model = get_or<std::string>(e, "model", "");
            cfg.metrics.embedding_endpoint.credential_env =
                get_or<std::string>(e, "credential_env", "");
            cfg.metrics.embedding_cache = get_or<std::string>(e, "cache", "");
            if (cfg.metrics.embedding_kind != "internal" && cfg.metrics.embedding_kind != "remote") {
                throw ConfigError("metrics.embedding.kind must be internal or remote");
            }
        }
    }

    if (root.contains("run")) {
        const auto& r = root["run"];
        check_keys(r, {"n_poems", "iterations", "seed", "init_seed", "threads"}, "run");
        cfg.run.n_poems = get_or<int>(r, "n_poems", cfg.run.n_poems);
        cfg.run.iterations = get_or<int>(r, "iterations", cfg.run.iterations);
        cfg.run.seed = get_or<std::uint64_t>(r, "seed", cfg.run.seed);
        if (r.contains("init_seed")) cfg.run.init_seed = r["init_seed"].get<std::uint64_t>();
        cfg.run.threads = get_or<int>(r, "threads", cfg.run.threads);
        if (cfg.run.n_poems < 1) throw ConfigError("run.n_poems must be >= 1");
        if (cfg.run.iterations < 0) throw ConfigError("run.iterations must be >= 0");
        if (cfg.run.threads < 1) throw ConfigError("run.threads must be >= 1");
    }

    if (root.contains("output")) {
        check_keys(root["output"], {"dir"}, "output");
        cfg.out_dir = get_or<std::string>(root["output"], "dir", cfg.out_dir);
    }

    // cross-field checks
    for (int i = 0; i < cfg.m(); ++i) {
        const auto& spec = cfg.agents[static_cast<std::size_t>(i)];
        const bool is_chat = spec.backend == BackendKind::kChat;
        if (cfg.mode == "training" && is_chat) {
            throw ConfigError("training mode cannot use chat agents (agent " + std::to_string(i) +
                              ")");
        }
        if (cfg.mode == "prompting" && !is_chat) {
            throw ConfigError("prompting mode needs chat agents (agent " + std::to_string(i) + ")");
        }
        if (!is_chat && spec.backend == BackendKind::kNgram &&
            (cfg.train.loss_mode == LossMode::kCl || cfg.train.loss_mode == LossMode::kCePlusCl)) {
            throw ConfigError("contrastive loss modes need the neural backend (agent " +
                              std::to_string(i) + ")");
        }
    }
    if (cfg.corpus.path.empty()) throw ConfigError("corpus.path is required");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str(), path);
}

std::string config_canonical_json(const ExperimentConfig& cfg) {
    json agents = json::array();
    for (const auto& a : cfg.agents) {
        json spec{{"backend", backend_name(a.backend)}};
        if (a.backend == BackendKind::kNgram) {
            spec["order"] = a.order;
            spec["kappa"] = a.kappa;
            spec["embed_dim"] = a.embed_dim;
        } else if (a.backend == BackendKind::kNeural) {
            spec["dim"] = a.dim;
            spec["window"] = a.window;
            spec["init_scale"] = a.init_scale;
        } else {
            spec["transport"] = a.transport;
            spec["endpoint"] = json{{"base_url", a.endpoint.base_url},
                                    {"model", a.endpoint.model},
                                    {"credential_env", a.endpoint.credential_env},
                                    {"max_retries", a.endpoint.max_retries},
                                    {"backoff_seconds", a.endpoint.backoff_seconds},
                                    {"timeout_seconds", a.endpoint.timeout_seconds},
                                    {"temperature", a.endpoint.temperature},
                                    {"rate_limit_rps", a.endpoint.rate_limit_rps}};
        }
        agents.push_back(spec);
    }

    json groups = json::array();
    for (Group g : cfg.groups) groups.push_back(group_name(g));

    json root{
        {"schema_version", 1},
        {"mode", cfg.mode},
        {"network", json{{"groups", groups}}},
        {"agents", agents},
        {"corpus", json{{"path", cfg.corpus.path},
                        {"dedup", cfg.corpus.dedup},
                        {"dedup_threshold", cfg.corpus.dedup_threshold},
                        {"pretrain_fraction", cfg.corpus.pretrain_fraction},
                        {"subset_size", cfg.corpus.subset_size},
                        {"pretrain_steps", cfg.corpus.pretrain_steps},
                        {"init_epochs", cfg.corpus.init_epochs}}},
        {"decode", json{{"alpha", cfg.decode.alpha},
                        {"n_agents", cfg.decode.n_agents},
                        {"temperature", cfg.decode.sampler.temperature},
                        {"top_k", cfg.decode.sampler.top_k},
                        {"top_p", cfg.decode.sampler.top_p},
                        {"max_tokens", cfg.decode.sampler.max_tokens}}},
        {"train", json{{"loss_mode", loss_mode_name(cfg.train.loss_mode)},
                       {"learning_rate", cfg.train.learning_rate},
                       {"epochs", cfg.train.epochs},
                       {"batch_size", cfg.train.batch_size},
                       {"tau", cfg.train.tau},
                       {"cl_weight", cfg.train.cl_weight},
                       {"count_weight", cfg.train.count_weight}}},
        {"prompting", json{{"strategy", cfg.prompt_strategy}}},
        {"metrics", json{{"max_pairs", cfg.metrics.max_pairs},
                         {"pooled", cfg.metrics.pooled},
                         {"embedding", json{{"kind", cfg.metrics.embedding_kind},
                                            {"dimension", cfg.metrics.embedding_dim},
                                            {"seed", cfg.metrics.embedding_seed}}}}},
        {"run", json{{"n_poems", cfg.run.n_poems},
                     {"iterations", cfg.run.iterations},
                     {"seed", cfg.run.seed},
                     {"threads", cfg.run.threads}}},
        {"output", json{{"dir", cfg.out_dir}}},
    };
    if (cfg.run.init_seed) root["run"]["init_seed"] = *cfg.run.init_seed;
    return root.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    return fnv1a64(config_canonical_json(config));
}

std::unique_ptr<EmbeddingProvider> make_metrics_embedder(const ExperimentConfig& config) {
    if (config.metrics.embedding_kind == "remote") {
        return std::make_unique<RemoteEmbedder>(config.metrics.embedding_endpoint,
                                                config.metrics.embedding_cache);
    }
    return std::make_unique<InternalEmbedder>(config.metrics.embedding_dim,
                                              config.metrics.embedding_seed);
}

}  // namespace versenet
