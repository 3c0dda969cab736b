#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "versenet/chat.hpp"
#include "versenet/decode.hpp"
#include "versenet/embedding.hpp"
#include "versenet/lm.hpp"
#include "versenet/network.hpp"

namespace versenet {

enum class BackendKind { kNgram, kNeural, kChat };

const char* backend_name(BackendKind kind);

struct AgentSpec {
    BackendKind backend = BackendKind::kNeural;
    // ngram backend
    int order = 3;
    double kappa = 0.5;
    // neural backend
    std::size_t dim = 32;
    std::size_t window = 4;
    double init_scale = 0.1;
    // embedding table size for the ngram backend
    std::size_t embed_dim = 32;
    // chat backend
    ChatEndpoint endpoint;
    std::string transport = "http";  // "http" | "mock"

    // stable signature used to share pretrained bases between identical specs
    std::string signature() const;
};

struct CorpusSpec {
    std::string path;
    bool dedup = true;
    double dedup_threshold = 0.7;
    // Share of the preselected corpus used to pretrain the shared base (and to
    // build the novelty reference); the rest stays vocabulary-only headroom.
    double pretrain_fraction = 0.6;
    std::size_t subset_size = 120;  // per-agent initialization subset
    int pretrain_steps = 720;
    int init_epochs = 1;
};

struct MetricsSpec {
    std::size_t max_pairs = 2000;
    bool pooled = false;  // pooled-corpus variant of distinct/novelty
    std::string embedding_kind = "internal";  // "internal" | "remote"
    std::size_t embedding_dim = 64;
    std::uint64_t embedding_seed = 9001;
    EmbeddingEndpoint embedding_endpoint;
    std::string embedding_cache;  // cache path for the remote kind
};

struct RunSpec {
    int n_poems = 50;    // N
    int iterations = 4;  // T
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> init_seed;  // defaults to seed; stability
                                             // replicas share it
    int threads = 1;
};

struct ExperimentConfig {
    std::string mode = "training";  // training | prompting | mixed
    std::vector<Group> groups;      // index = agent id
    std::vector<AgentSpec> agents;  // one per agent
    CorpusSpec corpus;
    DecodeConfig decode;
    TrainConfig train;
    std::string prompt_strategy = "chain";
    MetricsSpec metrics;
    RunSpec run;
    std::string out_dir = "out";

    int m() const { return static_cast<int>(groups.size()); }
    std::uint64_t init_seed() const { return run.init_seed.value_or(run.seed); }
    SignedNetwork build_network() const;
};

// Strict parse: unknown keys are rejected at every level.
ExperimentConfig parse_config_json(const std::string& content, const std::string& origin);
ExperimentConfig load_config_file(const std::string& path);

// Canonical snapshot (sorted keys, normalized agent list) and its hash; the
// hash is recorded in every output directory.
std::string config_canonical_json(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

std::unique_ptr<EmbeddingProvider> make_metrics_embedder(const ExperimentConfig& config);

}  // namespace versenet
