#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "versenet/chat.hpp"
#include "versenet/config.hpp"
#include "versenet/corpus.hpp"
#include "versenet/lm.hpp"
#include "versenet/metrics.hpp"
#include "versenet/persist.hpp"
#include "versenet/poem.hpp"
#include "versenet/prompts.hpp"

namespace versenet {

// Stable per-poem and per-update seed derivation; resume reproduces an
// uninterrupted run because these depend only on coordinates, never on how
// many random draws happened before.
std::uint64_t poem_seed(std::uint64_t run_seed, int iteration, AgentId agent, int poem_idx);
std::uint64_t update_seed(std::uint64_t run_seed, int iteration, AgentId agent);

struct FailureRecord {
    int iteration = 0;
    AgentId agent = 0;
    int poem_idx = 0;
    std::string error;
};

struct RunOptions {
    bool resume = false;
    // Testing hook: stop after persisting this iteration, as if the process
    // was killed at the boundary. -1 runs to completion.
    int stop_after = -1;
};

struct RunLog {
    std::string out_dir;
    std::string config_hash_hex;
    int completed_iteration = -1;
    std::size_t total_poems = 0;
    std::size_t failure_count = 0;
};

// One experiment instance: the signed network, the agents (trainable models or
// chat clients), the per-iteration pools, and the metric rows.
class Experiment {
public:
    explicit Experiment(ExperimentConfig config);
    ~Experiment();

    // Corpus pipeline, shared-base pretraining, per-agent initialization and
    // the iteration-0 baseline pool.
    void initialize();

    // Generate phase for all agents into S_t, then the update phase; t >= 1.
    PoemPool& run_iteration(int t);

    // Full pipeline with persistence: initialize (or resume), iterate to T,
    // write pools, checkpoints, metric tables and the manifest.
    RunLog run(const RunOptions& options = {});

    const ExperimentConfig& config() const { return config_; }
    const SignedNetwork& network() const { return net_; }
    const Vocab& vocab() const { return vocab_; }
    const ReferenceSet& reference() const { return reference_; }
    const PoemPool& pool(int t) const;
    bool has_pool(int t) const { return pools_.count(t) > 0; }
    TrainableLM* model(AgentId agent);
    int model_version(AgentId agent) const;
    Memory& memory() { return memory_; }
    ChatClient* chat_client(AgentId agent);
    const std::vector<FailureRecord>& failures() const { return failures_; }
    const std::vector<MetricsRow>& metric_rows() const { return rows_; }

private:
    struct TrainedAgent {
        std::unique_ptr<TrainableLM> model;
        int version = 0;
    };
    struct ChatAgent {
        PromptAgent state;
        std::unique_ptr<ChatClient> client;
        PromptStrategy strategy = PromptStrategy::kChain;
    };

    bool is_trainable(AgentId agent) const;
    std::vector<Poem> generate_for_agent(AgentId agent, int t, int n_poems);
    void update_trainable(AgentId agent, int t);
    void validate_peer_availability() const;
    std::vector<AgentId> trainable_peers(const std::vector<AgentId>& peers) const;
    void append_metric_rows(const PoemPool& pool);
    void persist_iteration(int t);
    void load_resume_state();
    void write_manifest(int completed);
    void append_transcripts(int t);

    ExperimentConfig config_;
    SignedNetwork net_;
    Vocab vocab_;
    ReferenceSet reference_;
    std::map<AgentId, TrainedAgent> trained_;
    std::map<AgentId, ChatAgent> chat_;
    Memory memory_;
    std::map<int, PoemPool> pools_;
    std::vector<MetricsRow> rows_;
    std::vector<FailureRecord> failures_;
    std::unique_ptr<EmbeddingProvider> embedder_;
    std::string run_id_;
    bool initialized_ = false;
};

// Metric rows for one pool (per-agent, mean, and pool-level statistics).
std::vector<MetricsRow> evaluate_pool(const PoemPool& pool, const ExperimentConfig& config,
                                      const SignedNetwork& net, const ReferenceSet* reference,
                                      EmbeddingProvider& embed, const std::string& run_id);

// Recompute all metric tables for a persisted run directory.
std::vector<MetricsRow> evaluate_run_dir(const std::string& dir);

// Per-iteration mean statistics extracted from metric rows, for stability
// analysis across runs.
StatTable stat_table_from_rows(const std::vector<MetricsRow>& rows);

}  // namespace versenet
