#include "versenet/loop.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "versenet/decode.hpp"
#include "versenet/errors.hpp"
#include "versenet/finetune.hpp"
#include "versenet/hash.hpp"
#include "versenet/text.hpp"

namespace versenet {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t poem_seed(std::uint64_t run_seed, int iteration, AgentId agent, int poem_idx) {
    return derive_seed(run_seed, 0x67656e00ULL, static_cast<std::uint64_t>(iteration),
                       static_cast<std::uint64_t>(agent), static_cast<std::uint64_t>(poem_idx));
}

std::uint64_t update_seed(std::uint64_t run_seed, int iteration, AgentId agent) {
    return derive_seed(run_seed, 0x75706400ULL, static_cast<std::uint64_t>(iteration),
                       static_cast<std::uint64_t>(agent));
}

Experiment::Experiment(ExperimentConfig config)
    : config_(std::move(config)), net_(config_.build_network()) {
    run_id_ = hex64(config_hash(config_));
    embedder_ = make_metrics_embedder(config_);
}

Experiment::~Experiment() = default;

bool Experiment::is_trainable(AgentId agent) const {
    return config_.agents[static_cast<std::size_t>(agent)].backend != BackendKind::kChat;
}

const PoemPool& Experiment::pool(int t) const {
    auto it = pools_.find(t);
    if (it == pools_.end()) throw Error("pool " + std::to_string(t) + " not present");
    return it->second;
}

TrainableLM* Experiment::model(AgentId agent) {
    auto it = trained_.find(agent);
    return it == trained_.end() ? nullptr : it->second.model.get();
}

int Experiment::model_version(AgentId agent) const {
    auto it = trained_.find(agent);
    return it == trained_.end() ? 0 : it->second.version;
}

ChatClient* Experiment::chat_client(AgentId agent) {
    auto it = chat_.find(agent);
    return it == chat_.end() ? nullptr : it->second.client.get();
}

std::vector<AgentId> Experiment::trainable_peers(const std::vector<AgentId>& peers) const {
    std::vector<AgentId> out;
    for (AgentId a : peers) {
        if (is_trainable(a)) out.push_back(a);
    }
    return out;
}

void Experiment::validate_peer_availability() const {
    for (AgentId a : net_.agents()) {
        if (!is_trainable(a)) continue;
        const auto tuple = net_.agent_tuple(a);
        const int peers = config_.decode.n_agents - 1;
        const int need_friends = peers / 2;
        const int need_foes = peers - need_friends;
        if (need_friends > static_cast<int>(trainable_peers(tuple.in_group).size()) ||
            need_foes > static_cast<int>(trainable_peers(tuple.out_group).size())) {
            throw ConfigError("agent " + std::to_string(a) + " lacks trainable peers for n_agents=" +
                              std::to_string(config_.decode.n_agents));
        }
    }
}

void Experiment::initialize() {
    const std::uint64_t init_seed = config_.init_seed();

    Corpus corpus = load_corpus(config_.corpus.path);
    if (config_.corpus.dedup) {
        corpus = dedup_preselect(corpus, *embedder_, config_.corpus.dedup_threshold);
    }

    // The shared base trains on a preselected fraction; the remainder keeps
    // out-of-reference vocabulary reachable, which is what makes novelty
    // measurable at desk scale.
    const std::size_t n_pre = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(config_.corpus.pretrain_fraction * static_cast<double>(corpus.size()))));
    Corpus pretrain_corpus;
    {
        SeededRng rng(derive_seed(init_seed, 0x70726573ULL));
        auto idx = rng.sample_indices(corpus.size(), n_pre);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) pretrain_corpus.items.push_back(corpus.items[i]);
    }
    reference_ = build_reference(pretrain_corpus);

    std::vector<std::string> all_tokens;
    for (const auto& q : corpus.items) {
        for (auto& tok : tokenize(q.text())) all_tokens.push_back(std::move(tok));
    }
    vocab_ = Vocab::from_tokens(all_tokens);

    validate_peer_availability();

    std::vector<Corpus> subsets;
    {
        SeededRng rng(derive_seed(init_seed, 0x73706c69ULL));
        subsets = split_init(pretrain_corpus, net_.size(), config_.corpus.subset_size, rng);
    }

    // One pretrained base per distinct backend spec, then per-agent finetunes.
    std::map<std::string, std::unique_ptr<TrainableLM>> bases;
    for (AgentId a : net_.agents()) {
        const auto& spec = config_.agents[static_cast<std::size_t>(a)];
        if (spec.backend == BackendKind::kChat) {
            ChatAgent chat;
            chat.state.id = a;
            chat.state.group = net_.group_of(a);
            chat.strategy = strategy_from_name(config_.prompt_strategy);
            std::shared_ptr<HttpTransport> transport;
            if (spec.transport == "mock") transport = std::make_shared<MockChatTransport>();
            chat.client = std::make_unique<ChatClient>(spec.endpoint, transport);
            chat_.emplace(a, std::move(chat));
            continue;
        }

        auto base_it = bases.find(spec.signature());
        if (base_it == bases.end()) {
            std::unique_ptr<TrainableLM> base;
            if (spec.backend == BackendKind::kNgram) {
                base = std::make_unique<NgramLM>(vocab_, spec.order, spec.kappa, spec.embed_dim,
                                                 derive_seed(init_seed, 0x656d6264ULL));
            } else {
                base = std::make_unique<NeuralLM>(vocab_, spec.dim, spec.window,
                                                  derive_seed(init_seed, fnv1a64(spec.signature())),
                                                  spec.init_scale);
            }
            TrainConfig pre_cfg = config_.train;
            pre_cfg.loss_mode = LossMode::kCe;
            pre_cfg.seed = derive_seed(init_seed, 0x70726574ULL);
            pretrain(*base, pretrain_corpus, config_.corpus.pretrain_steps, pre_cfg);
            base_it = bases.emplace(spec.signature(), std::move(base)).first;
        }

        TrainedAgent agent;
        agent.model = base_it->second->clone();
        const auto& subset = subsets[static_cast<std::size_t>(a)];
        TrainConfig init_cfg = config_.train;
        init_cfg.loss_mode = LossMode::kCe;
        init_cfg.seed = derive_seed(init_seed, 0x61696e69ULL, static_cast<std::uint64_t>(a));
        const int batches_per_epoch = static_cast<int>(
            (subset.size() + static_cast<std::size_t>(init_cfg.batch_size) - 1) /
            static_cast<std::size_t>(init_cfg.batch_size));
        pretrain(*agent.model, subset, std::max(1, config_.corpus.init_epochs * batches_per_epoch),
                 init_cfg);
        trained_.emplace(a, std::move(agent));
    }

    // Iteration 0: the baseline state of freshly initialized agents. Trainable
    // agents sample solo; prompting agents enter with corpus samples, which
    // also seeds their memory for t=1.
    PoemPool baseline;
    baseline.iteration = 0;
    for (AgentId a : net_.agents()) {
        if (is_trainable(a)) {
            for (int i = 0; i < config_.run.n_poems; ++i) {
                const std::uint64_t seed = poem_seed(config_.run.seed, 0, a, i);
                SeededRng rng(seed);
                DecodeConfig solo = config_.decode;
                auto text = generate_poem(*trained_[a].model, {}, {}, solo, rng);
                baseline.poems.push_back(Poem{text.text, a, net_.group_of(a), 0, "baseline", seed,
                                              trained_[a].version});
            }
        } else {
            SeededRng rng(derive_seed(config_.init_seed(), 0x70696e69ULL,
                                      static_cast<std::uint64_t>(a)));
            for (int i = 0; i < config_.run.n_poems; ++i) {
                const auto& q =
                    corpus.items[static_cast<std::size_t>(rng.uniform_u64(corpus.size()))];
                const std::uint64_t seed = poem_seed(config_.run.seed, 0, a, i);
                baseline.poems.push_back(
                    Poem{q.text(), a, net_.group_of(a), 0, "init_sample", seed, 0});
                memory_.append(a, 0, q.text());
            }
        }
    }
    pools_[0] = std::move(baseline);
    initialized_ = true;
}

std::vector<Poem> Experiment::generate_for_agent(AgentId agent, int t, int n_poems) {
    std::vector<Poem> out;
    const auto tuple = net_.agent_tuple(agent);

    if (is_trainable(agent)) {
        auto& self = trained_[agent];
        AgentTuple decode_tuple{agent, trainable_peers(tuple.in_group),
                                trainable_peers(tuple.out_group)};
        std::vector<TokenId> prime;
        if (config_.train.loss_mode == LossMode::kCePrefix && self.version > 0) {
            prime.push_back(Vocab::kPositiveTag);
        }
        for (int i = 0; i < n_poems; ++i) {
            const std::uint64_t seed = poem_seed(config_.run.seed, t, agent, i);
            SeededRng rng(seed);
            const auto subsets = select_interactive(decode_tuple, config_.decode.n_agents, rng);
            std::vector<const TrainableLM*> in_models, out_models;
            for (AgentId p : subsets.in_subset) in_models.push_back(trained_[p].model.get());
            for (AgentId p : subsets.out_subset) out_models.push_back(trained_[p].model.get());
            auto text = generate_poem(*self.model, in_models, out_models, config_.decode, rng, prime);
            out.push_back(
                Poem{text.text, agent, net_.group_of(agent), t, "decode", seed, self.version});
        }
        return out;
    }

    auto& chat = chat_.at(agent);
    for (int i = 0; i < n_poems; ++i) {
        const std::uint64_t seed = poem_seed(config_.run.seed, t, agent, i);
        SeededRng rng(seed);
        try {
            auto result =
                prompt_generate(chat.state, tuple, memory_, chat.strategy, *chat.client, rng, t);
            out.push_back(Poem{result.text, agent, net_.group_of(agent), t,
                               strategy_name(chat.strategy), seed, 0});
        } catch (const Error& e) {
            failures_.push_back(FailureRecord{t, agent, i, e.what()});
        }
    }
    return out;
}

void Experiment::update_trainable(AgentId agent, int t) {
    auto& self = trained_[agent];
    TrainConfig cfg = config_.train;
    cfg.seed = update_seed(config_.run.seed, t, agent);
    const PoemPool* prev = t > 1 ? &pools_.at(t - 1) : nullptr;
    update_agent(*self.model, pools_.at(t), prev, net_.agent_tuple(agent), cfg);
    self.version += 1;
}

PoemPool& Experiment::run_iteration(int t) {
    if (!initialized_) throw Error("experiment not initialized");
    if (t < 1) throw Error("iterations start at 1");
    if (pools_.find(t - 1) == pools_.end()) throw Error("missing pool for iteration t-1");

    // Generate phase for every agent against the pre-update models/memories.
    PoemPool pool;
    pool.iteration = t;
    std::vector<std::vector<Poem>> per_agent(static_cast<std::size_t>(net_.size()));
    if (config_.run.threads > 1) {
        std::vector<std::future<std::vector<Poem>>> futures;
        for (AgentId a : net_.agents()) {
            futures.push_back(std::async(std::launch::async, [this, a, t] {
                return generate_for_agent(a, t, config_.run.n_poems);
            }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) per_agent[i] = futures[i].get();
    } else {
        for (AgentId a : net_.agents()) {
            per_agent[static_cast<std::size_t>(a)] = generate_for_agent(a, t, config_.run.n_poems);
        }
    }
    for (auto& poems : per_agent) {
        for (auto& p : poems) pool.poems.push_back(std::move(p));
    }

    // Barrier: nothing generated at t is visible to generation at t.
    for (const auto& p : pool.poems) {
        if (is_trainable(p.agent) && p.model_version != trained_[p.agent].version) {
            throw Error("generate/update ordering violated for agent " + std::to_string(p.agent));
        }
    }
    for (const auto& p : pool.poems) {
        if (!is_trainable(p.agent)) memory_.append(p.agent, t, p.text);
    }
    pools_[t] = std::move(pool);

    // Update phase.
    std::vector<AgentId> to_update;
    for (AgentId a : net_.agents()) {
        if (is_trainable(a)) to_update.push_back(a);
    }
    if (config_.run.threads > 1) {
        std::vector<std::future<void>> futures;
        for (AgentId a : to_update) {
            futures.push_back(
                std::async(std::launch::async, [this, a, t] { update_trainable(a, t); }));
        }
        for (auto& f : futures) f.get();
    } else {
        for (AgentId a : to_update) update_trainable(a, t);
    }
    return pools_.at(t);
}

// --- metrics ---------------------------------------------------------------

std::vector<MetricsRow> evaluate_pool(const PoemPool& pool, const ExperimentConfig& config,
                                      const SignedNetwork& net, const ReferenceSet* reference,
                                      EmbeddingProvider& embed, const std::string& run_id) {
    std::vector<MetricsRow> rows;
    const int t = pool.iteration;
    const bool with_novelty =
        reference != nullptr && !reference->unigrams.empty() && config.mode != "prompting";

    auto add = [&](const std::string& agent, const std::string& stat, double value) {
        rows.push_back(MetricsRow{run_id, t, agent, stat, value});
    };

    std::map<AgentId, double> d1, d2, n1, n2, lex;
    for (AgentId a : net.agents()) {
        const auto poems = pool.by_agent(a);
        if (poems.empty()) continue;
        const std::string name = std::to_string(a);
        d1[a] = distinct_n(poems, 1);
        d2[a] = distinct_n(poems, 2);
        add(name, "distinct_1", d1[a]);
        add(name, "distinct_2", d2[a]);
        if (with_novelty) {
            n1[a] = novelty_n(poems, *reference, 1);
            n2[a] = novelty_n(poems, *reference, 2);
            add(name, "novelty_1", n1[a]);
            add(name, "novelty_2", n2[a]);
        }
        lex[a] = lexicon_rate(poems, default_historical_lexicon());
        add(name, "lexicon_rate", lex[a]);
    }
    if (!d1.empty()) {
        add("mean", "distinct_1", aggregate_by_agent(d1));
        add("mean", "distinct_2", aggregate_by_agent(d2));
        if (with_novelty) {
            add("mean", "novelty_1", aggregate_by_agent(n1));
            add("mean", "novelty_2", aggregate_by_agent(n2));
        }
        add("mean", "lexicon_rate", aggregate_by_agent(lex));
    }

    if (config.metrics.pooled && !pool.poems.empty()) {
        add("-", "distinct_1_pooled", distinct_n(pool.poems, 1));
        add("-", "distinct_2_pooled", distinct_n(pool.poems, 2));
        if (with_novelty) {
            add("-", "novelty_1_pooled", novelty_n(pool.poems, *reference, 1));
            add("-", "novelty_2_pooled", novelty_n(pool.poems, *reference, 2));
        }
    }

    try {
        SeededRng rng(derive_seed(config.run.seed, 0x73696d00ULL, static_cast<std::uint64_t>(t)));
        const auto report = group_similarity(pool, net, embed, config.metrics.max_pairs, rng);
        add("-", "in_group_similarity", report.in_group_mean);
        add("-", "out_group_similarity", report.out_group_mean);
    } catch (const DegeneratePool&) {
        // pools with missing groups (e.g. after transport failures) simply
        // report no similarity cells
    }
    return rows;
}

void Experiment::append_metric_rows(const PoemPool& pool) {
    auto rows = evaluate_pool(pool, config_, net_, &reference_, *embedder_, run_id_);
    rows_.insert(rows_.end(), rows.begin(), rows.end());
}

// --- persistence -----------------------------------------------------------

namespace {

std::string models_dir(const std::string& out_dir, int t) {
    return (fs::path(out_dir) / ("models_" + std::to_string(t))).string();
}

std::string agent_ckpt(const std::string& dir, AgentId a) {
    return (fs::path(dir) / ("agent_" + std::to_string(a) + ".ckpt")).string();
}

}  // namespace

void Experiment::write_manifest(int completed) {
    json failures = json::array();
    for (const auto& f : failures_) {
        failures.push_back(json{{"iteration", f.iteration},
                                {"agent", f.agent},
                                {"poem_idx", f.poem_idx},
                                {"error", f.error}});
    }
    json manifest{{"schema", 1},
                  {"config_hash", run_id_},
                  {"seed", config_.run.seed},
                  {"init_seed", config_.init_seed()},
                  {"completed_iteration", completed},
                  {"iterations", config_.run.iterations},
                  {"failures", failures}};
    write_file_atomic((fs::path(config_.out_dir) / "manifest.json").string(), manifest.dump(2));
}

void Experiment::append_transcripts(int t) {
    if (chat_.empty()) return;
    std::ofstream out((fs::path(config_.out_dir) / "transcripts.jsonl").string(), std::ios::app);
    for (auto& [agent, chat] : chat_) {
        for (const auto& entry : chat.client->transcript()) {
            out << json{{"agent", agent},
                        {"iteration", t},
                        {"request", entry.request},
                        {"status", entry.status},
                        {"response", entry.response},
                        {"attempts", entry.attempts}}
                       .dump()
                << "\n";
        }
        chat.client->clear_transcript();
    }
}

void Experiment::persist_iteration(int t) {
    persist_pool(pools_.at(t), config_.out_dir);
    if (!trained_.empty()) {
        const std::string dir = models_dir(config_.out_dir, t);
        fs::create_directories(dir);
        for (const auto& [agent, state] : trained_) {
            save_lm_file(*state.model, agent_ckpt(dir, agent));
        }
    }
    append_transcripts(t);
    write_metrics_csv(rows_, (fs::path(config_.out_dir) / "metrics.csv").string());
    write_manifest(t);
}

void Experiment::load_resume_state() {
    const fs::path dir(config_.out_dir);
    const std::string manifest_path = (dir / "manifest.json").string();
    json manifest = json::parse(read_file(manifest_path), nullptr, false);
    if (manifest.is_discarded()) throw ParseError(manifest_path + ": invalid JSON");
    if (manifest.value("config_hash", "") != run_id_) {
        throw ConfigError("resume config does not match the run directory (hash mismatch)");
    }
    const int completed = manifest.at("completed_iteration").get<int>();

    reference_ = load_reference((dir / "reference.tsv").string());
    for (const auto& f : manifest.value("failures", json::array())) {
        failures_.push_back(FailureRecord{f.at("iteration").get<int>(), f.at("agent").get<AgentId>(),
                                          f.at("poem_idx").get<int>(),
                                          f.at("error").get<std::string>()});
    }

    for (int t = 0; t <= completed; ++t) {
        pools_[t] = load_pool((dir / pool_filename(t)).string());
    }

    for (AgentId a : net_.agents()) {
        const auto& spec = config_.agents[static_cast<std::size_t>(a)];
        if (spec.backend == BackendKind::kChat) {
            ChatAgent chat;
            chat.state.id = a;
            chat.state.group = net_.group_of(a);
            chat.strategy = strategy_from_name(config_.prompt_strategy);
            std::shared_ptr<HttpTransport> transport;
            if (spec.transport == "mock") transport = std::make_shared<MockChatTransport>();
            chat.client = std::make_unique<ChatClient>(spec.endpoint, transport);
            chat_.emplace(a, std::move(chat));
        } else {
            TrainedAgent agent;
            agent.model = load_lm_file(agent_ckpt(models_dir(config_.out_dir, completed), a));
            agent.version = completed;
            trained_.emplace(a, std::move(agent));
        }
    }
    if (!trained_.empty()) vocab_ = trained_.begin()->second.model->vocab();

    for (int t = 0; t <= completed; ++t) {
        for (const auto& p : pools_.at(t).poems) {
            if (!is_trainable(p.agent)) memory_.append(p.agent, t, p.text);
        }
        append_metric_rows(pools_.at(t));
    }
    initialized_ = true;
}

RunLog Experiment::run(const RunOptions& options) {
    fs::create_directories(config_.out_dir);
    const fs::path dir(config_.out_dir);

    int start_t = 1;
    const bool manifest_exists = fs::exists(dir / "manifest.json");
    if (options.resume && manifest_exists) {
        load_resume_state();
        int completed = -1;
        for (const auto& [t, _] : pools_) completed = std::max(completed, t);
        start_t = completed + 1;
    } else {
        write_file_atomic((dir / "config.json").string(), config_canonical_json(config_));
        initialize();
        save_reference(reference_, (dir / "reference.tsv").string());
        append_metric_rows(pools_.at(0));
        persist_iteration(0);
    }

    int completed = start_t - 1;
    const int last = options.stop_after >= 0 ? std::min(config_.run.iterations, options.stop_after)
                                             : config_.run.iterations;
    for (int t = start_t; t <= last; ++t) {
        run_iteration(t);
        append_metric_rows(pools_.at(t));
        persist_iteration(t);
        completed = t;
    }

    RunLog log;
    log.out_dir = config_.out_dir;
    log.config_hash_hex = run_id_;
    log.completed_iteration = completed;
    for (const auto& [_, p] : pools_) log.total_poems += p.poems.size();
    log.failure_count = failures_.size();
    return log;
}

std::vector<MetricsRow> evaluate_run_dir(const std::string& dir) {
    const fs::path base(dir);
    ExperimentConfig config = load_config_file((base / "config.json").string());
    const SignedNetwork net = config.build_network();
    auto embedder = make_metrics_embedder(config);
    ReferenceSet reference;
    if (fs::exists(base / "reference.tsv")) {
        reference = load_reference((base / "reference.tsv").string());
    }
    const std::string run_id = hex64(config_hash(config));

    std::vector<MetricsRow> rows;
    for (int t = 0;; ++t) {
        const fs::path pool_path = base / pool_filename(t);
        if (!fs::exists(pool_path)) break;
        const PoemPool pool = load_pool(pool_path.string());
        auto pool_rows = evaluate_pool(pool, config, net,
                                       reference.unigrams.empty() ? nullptr : &reference,
                                       *embedder, run_id);
        rows.insert(rows.end(), pool_rows.begin(), pool_rows.end());
    }
    if (rows.empty()) throw IoError("no pools found in " + dir);
    return rows;
}

StatTable stat_table_from_rows(const std::vector<MetricsRow>& rows) {
    StatTable table;
    for (const auto& r : rows) {
        if (r.agent != "mean" || r.iteration < 1) continue;
        table.cells[r.statistic][r.iteration] = r.value;
    }
    return table;
}

}  // namespace versenet
