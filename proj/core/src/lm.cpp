#include "versenet/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "versenet/errors.hpp"
#include "versenet/rng.hpp"

namespace versenet {

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

const char* loss_mode_name(LossMode mode) {
    switch (mode) {
        case LossMode::kCe: return "ce";
        case LossMode::kCl: return "cl";
        case LossMode::kCePlusCl: return "ce_plus_cl";
        case LossMode::kCePrefix: return "ce_prefix";
    }
    return "?";
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "ce") return LossMode::kCe;
    if (name == "cl") return LossMode::kCl;
    if (name == "ce_plus_cl") return LossMode::kCePlusCl;
    if (name == "ce_prefix") return LossMode::kCePrefix;
    throw ConfigError("unknown loss mode: " + name);
}

EmbeddingVector TrainableLM::embed_text(const std::string& text) const {
    const auto ids = vocab().encode_text(text);
    return embed_tokens(ids);
}

namespace {

// Fixed random embedding row shared by NgramLM and the offline embedder idiom:
// regenerated on demand from (seed, token) so checkpoints stay small.
void add_seeded_row(std::vector<double>& acc, std::uint64_t seed, TokenId tok) {
    SeededRng rng(derive_seed(seed, static_cast<std::uint64_t>(tok)));
    for (double& v : acc) v += rng.normal();
}

EmbeddingVector mean_rows_seeded(std::span<const TokenId> tokens, std::size_t dim,
                                 std::uint64_t seed) {
    EmbeddingVector acc(dim, 0.0);
    if (tokens.empty()) return acc;
    for (TokenId t : tokens) add_seeded_row(acc, seed, t);
    for (double& v : acc) v /= static_cast<double>(tokens.size());
    l2_normalize(acc);
    return acc;
}

}  // namespace

NgramLM::NgramLM(Vocab vocab, int order, double kappa, std::size_t embed_dim,
                 std::uint64_t embed_seed)
    : vocab_(std::move(vocab)), order_(order), kappa_(kappa), embed_dim_(embed_dim),
      embed_seed_(embed_seed) {
    if (order_ < 1) throw ConfigError("ngram order must be >= 1");
    if (kappa_ < 0.0) throw ConfigError("smoothing constant must be >= 0");
    if (embed_dim_ < 2) throw ConfigError("embedding dimension must be >= 2");
}

std::vector<TokenId> NgramLM::context_key(std::span<const TokenId> context) const {
    const std::size_t need = static_cast<std::size_t>(order_ - 1);
    std::vector<TokenId> key(need, Vocab::kBos);
    const std::size_t take = std::min(need, context.size());
    for (std::size_t i = 0; i < take; ++i) {
        key[need - take + i] = context[context.size() - take + i];
    }
    return key;
}

std::vector<double> NgramLM::logits(std::span<const TokenId> context) const {
    const std::size_t v = static_cast<std::size_t>(vocab_.size());
    std::vector<double> out(v, 0.0);
    const ContextCounts* cc = nullptr;
    auto it = table_.find(context_key(context));
    if (it != table_.end()) cc = &it->second;

    const double total = cc ? cc->total : 0.0;
    const double denom = total + kappa_ * static_cast<double>(v);
    for (std::size_t tok = 0; tok < v; ++tok) {
        double count = 0.0;
        if (cc) {
            auto ct = cc->counts.find(static_cast<TokenId>(tok));
            if (ct != cc->counts.end()) count = ct->second;
        }
        const double num = count + kappa_;
        out[tok] = (num > 0.0 && denom > 0.0) ? std::log(num / denom) : kMinLogit;
    }
    return out;
}

EmbeddingVector NgramLM::embed_tokens(std::span<const TokenId> tokens) const {
    return mean_rows_seeded(tokens, embed_dim_, embed_seed_);
}

std::unique_ptr<TrainableLM> NgramLM::clone() const { return std::make_unique<NgramLM>(*this); }

void NgramLM::accumulate(std::span<const TokenId> framed, double weight) {
    for (std::size_t t = 1; t < framed.size(); ++t) {
        auto key = context_key(framed.subspan(0, t));
        auto& cc = table_[std::move(key)];
        cc.counts[framed[t]] += weight;
        cc.total += weight;
    }
}

NeuralLM::NeuralLM(Vocab vocab, std::size_t dim, std::size_t window, std::uint64_t seed,
                   double init_scale)
    : vocab_(std::move(vocab)), vocab_size_(static_cast<std::size_t>(vocab_.size())), dim_(dim),
      window_(window) {
    if (dim_ < 2) throw ConfigError("neural dim must be >= 2");
    if (window_ < 1) throw ConfigError("neural window must be >= 1");
    params_.assign(2 * vocab_size_ * dim_ + vocab_size_, 0.0);
    if (init_scale != 0.0) {
        SeededRng rng(derive_seed(seed, 0x6e657572ULL));
        for (std::size_t i = 0; i < 2 * vocab_size_ * dim_; ++i) {
            params_[i] = init_scale * rng.normal();
        }
    }
}

std::vector<double> NeuralLM::context_vector(std::span<const TokenId> context) const {
    std::vector<double> c(dim_, 0.0);
    const std::size_t take = std::min(window_, context.size());
    if (take == 0) return c;
    for (std::size_t i = context.size() - take; i < context.size(); ++i) {
        const double* row = params_.data() + embed_offset(context[i]);
        for (std::size_t j = 0; j < dim_; ++j) c[j] += row[j];
    }
    for (double& v : c) v /= static_cast<double>(take);
    return c;
}

std::vector<double> NeuralLM::logits(std::span<const TokenId> context) const {
    const auto c = context_vector(context);
    std::vector<double> out(vocab_size_, 0.0);
    const double* bias = params_.data() + bias_offset();
    for (std::size_t tok = 0; tok < vocab_size_; ++tok) {
        const double* row = params_.data() + output_offset(static_cast<TokenId>(tok));
        double z = bias[tok];
        for (std::size_t j = 0; j < dim_; ++j) z += row[j] * c[j];
        out[tok] = z;
    }
    return out;
}

EmbeddingVector NeuralLM::embed_tokens(std::span<const TokenId> tokens) const {
    EmbeddingVector acc(dim_, 0.0);
    if (tokens.empty()) return acc;
    for (TokenId t : tokens) {
        const double* row = params_.data() + embed_offset(t);
        for (std::size_t j = 0; j < dim_; ++j) acc[j] += row[j];
    }
    for (double& v : acc) v /= static_cast<double>(tokens.size());
    l2_normalize(acc);
    return acc;
}

std::unique_ptr<TrainableLM> NeuralLM::clone() const { return std::make_unique<NeuralLM>(*this); }

double NeuralLM::ce_loss_grad(const std::vector<std::vector<TokenId>>& framed,
                              std::span<double> grad) const {
    if (grad.size() != params_.size()) throw Error("gradient buffer size mismatch");
    if (framed.empty()) throw EmptyTrainingSet("no sequences in CE batch");

    double loss = 0.0;
    std::vector<double> dc(dim_);
    for (const auto& seq : framed) {
        for (std::size_t t = 1; t < seq.size(); ++t) {
            const auto context = std::span<const TokenId>(seq).subspan(0, t);
            const auto c = context_vector(context);
            auto z = logits(context);
            auto p = softmax(z);
            const TokenId target = seq[t];
            loss += -std::log(std::max(p[static_cast<std::size_t>(target)], 1e-300));

            // dz = p - onehot(target)
            p[static_cast<std::size_t>(target)] -= 1.0;
            std::fill(dc.begin(), dc.end(), 0.0);
            double* db = grad.data() + bias_offset();
            for (std::size_t tok = 0; tok < vocab_size_; ++tok) {
                const double dz = p[tok];
                if (dz == 0.0) continue;
                db[tok] += dz;
                const double* w_row = params_.data() + output_offset(static_cast<TokenId>(tok));
                double* gw_row = grad.data() + output_offset(static_cast<TokenId>(tok));
                for (std::size_t j = 0; j < dim_; ++j) {
                    gw_row[j] += dz * c[j];
                    dc[j] += dz * w_row[j];
                }
            }
            const std::size_t take = std::min(window_, context.size());
            const double inv = 1.0 / static_cast<double>(take);
            for (std::size_t i = context.size() - take; i < context.size(); ++i) {
                double* ge = grad.data() + embed_offset(context[i]);
                for (std::size_t j = 0; j < dim_; ++j) ge[j] += dc[j] * inv;
            }
        }
    }

    const double scale = 1.0 / static_cast<double>(framed.size());
    for (double& g : grad) g *= scale;
    return loss * scale;
}

void NeuralLM::sgd_step(std::span<const double> grad, double learning_rate) {
    if (grad.size() != params_.size()) throw Error("gradient buffer size mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        params_[i] -= learning_rate * grad[i];
        if (!std::isfinite(params_[i])) {
            throw DivergenceDetected("non-finite parameter after SGD step");
        }
    }
}

std::vector<TokenId> frame_text(const Vocab& vocab, const std::string& text) {
    std::vector<TokenId> out{Vocab::kBos};
    const auto body = vocab.encode_text(text);
    out.insert(out.end(), body.begin(), body.end());
    out.push_back(Vocab::kEos);
    return out;
}

double perplexity(const TrainableLM& lm, const Corpus& corpus) {
    if (corpus.empty()) throw EmptyCorpus("perplexity needs a non-empty corpus");
    double nll = 0.0;
    std::size_t count = 0;
    for (const auto& q : corpus.items) {
        std::vector<TokenId> stream{Vocab::kBos};
        const auto body = lm.vocab().encode_text(q.text());
        stream.insert(stream.end(), body.begin(), body.end());
        for (std::size_t t = 1; t < stream.size(); ++t) {
            const auto lp = log_softmax(lm.logits(std::span<const TokenId>(stream).subspan(0, t)));
            nll -= lp[static_cast<std::size_t>(stream[t])];
            ++count;
        }
    }
    if (count == 0) throw EmptyCorpus("corpus has no tokens");
    const double ppl = std::exp(nll / static_cast<double>(count));
    if (!std::isfinite(ppl)) throw DivergenceDetected("perplexity is not finite");
    return ppl;
}

void pretrain(TrainableLM& lm, const Corpus& corpus, int steps, const TrainConfig& config) {
    if (steps < 1) throw ConfigError("pretrain needs steps >= 1");
    if (corpus.empty()) throw EmptyCorpus("pretrain needs a non-empty corpus");

    std::vector<std::vector<TokenId>> framed;
    framed.reserve(corpus.size());
    for (const auto& q : corpus.items) framed.push_back(frame_text(lm.vocab(), q.text()));

    std::vector<std::size_t> order(framed.size());
    std::iota(order.begin(), order.end(), 0);
    SeededRng rng(derive_seed(config.seed, 0x70726574ULL));
    rng.shuffle(order);

    const std::size_t batch = std::max(1, config.batch_size);
    std::size_t cursor = 0;
    auto next_batch = [&]() {
        std::vector<std::vector<TokenId>> out;
        for (std::size_t i = 0; i < batch; ++i) {
            out.push_back(framed[order[cursor]]);
            cursor = (cursor + 1) % order.size();
        }
        return out;
    };

    if (lm.kind() == TrainableLM::Kind::kNgram) {
        auto& ngram = static_cast<NgramLM&>(lm);
        for (int s = 0; s < steps; ++s) {
            for (const auto& seq : next_batch()) ngram.accumulate(seq, config.count_weight);
        }
    } else {
        auto& neural = static_cast<NeuralLM&>(lm);
        std::vector<double> grad(neural.param_count());
        for (int s = 0; s < steps; ++s) {
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = neural.ce_loss_grad(next_batch(), grad);
            if (!std::isfinite(loss)) throw DivergenceDetected("pretrain loss is not finite");
            neural.sgd_step(grad, config.learning_rate);
        }
    }
}

// --- checkpoint io ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'N', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError("checkpoint truncated");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw ParseError("checkpoint truncated");
    return s;
}

void write_vocab(std::ostream& out, const Vocab& vocab) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.size()));
    for (const auto& t : vocab.tokens()) write_string(out, t);
}

Vocab read_vocab(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    if (n < Vocab::kNumSpecials) throw SchemaVersionMismatch("checkpoint vocab too small");
    Vocab vocab;
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string tok = read_string(in);
        if (i < Vocab::kNumSpecials) {
            if (vocab.token(static_cast<TokenId>(i)) != tok) {
                throw SchemaVersionMismatch("checkpoint specials do not match");
            }
        } else {
            vocab.add(tok);
        }
    }
    return vocab;
}

}  // namespace

void NgramLM::save(std::ostream& out) const {
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint8_t>(out, 0);  // kind: ngram
    write_vocab(out, vocab_);
    write_pod<std::int32_t>(out, order_);
    write_pod<double>(out, kappa_);
    write_pod<std::uint64_t>(out, embed_dim_);
    write_pod<std::uint64_t>(out, embed_seed_);
    write_pod<std::uint64_t>(out, table_.size());
    for (const auto& [key, cc] : table_) {
        for (TokenId t : key) write_pod<TokenId>(out, t);
        write_pod<std::uint64_t>(out, cc.counts.size());
        for (const auto& [tok, w] : cc.counts) {
            write_pod<TokenId>(out, tok);
            write_pod<double>(out, w);
        }
    }
}

void NeuralLM::save(std::ostream& out) const {
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint8_t>(out, 1);  // kind: neural
    write_vocab(out, vocab_);
    write_pod<std::uint64_t>(out, dim_);
    write_pod<std::uint64_t>(out, window_);
    write_pod<std::uint64_t>(out, params_.size());
    for (double p : params_) write_pod<double>(out, p);
}

std::unique_ptr<TrainableLM> load_lm(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw SchemaVersionMismatch("not a model checkpoint");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) {
        throw SchemaVersionMismatch("unsupported checkpoint version " + std::to_string(version));
    }
    const auto kind = read_pod<std::uint8_t>(in);
    Vocab vocab = read_vocab(in);

    if (kind == 0) {
        const auto order = read_pod<std::int32_t>(in);
        const auto kappa = read_pod<double>(in);
        const auto embed_dim = read_pod<std::uint64_t>(in);
        const auto embed_seed = read_pod<std::uint64_t>(in);
        auto lm = std::make_unique<NgramLM>(std::move(vocab), order, kappa,
                                            static_cast<std::size_t>(embed_dim), embed_seed);
        const auto n_contexts = read_pod<std::uint64_t>(in);
        for (std::uint64_t i = 0; i < n_contexts; ++i) {
            std::vector<TokenId> key(static_cast<std::size_t>(order - 1));
            for (auto& t : key) t = read_pod<TokenId>(in);
            auto& cc = lm->table_[key];
            const auto n_counts = read_pod<std::uint64_t>(in);
            for (std::uint64_t j = 0; j < n_counts; ++j) {
                const auto tok = read_pod<TokenId>(in);
                const auto w = read_pod<double>(in);
                cc.counts[tok] = w;
                cc.total += w;
            }
        }
        return lm;
    }
    if (kind == 1) {
        const auto dim = read_pod<std::uint64_t>(in);
        const auto window = read_pod<std::uint64_t>(in);
        auto lm = std::make_unique<NeuralLM>(std::move(vocab), static_cast<std::size_t>(dim),
                                             static_cast<std::size_t>(window), 0, 0.0);
        const auto n_params = read_pod<std::uint64_t>(in);
        if (n_params != lm->params_.size()) {
            throw SchemaVersionMismatch("checkpoint parameter count mismatch");
        }
        for (auto& p : lm->params_) p = read_pod<double>(in);
        return lm;
    }
    throw SchemaVersionMismatch("unknown model kind " + std::to_string(kind));
}

void save_lm_file(const TrainableLM& lm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    lm.save(out);
    if (!out) throw IoError("failed writing checkpoint " + path);
}

std::unique_ptr<TrainableLM> load_lm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    return load_lm(in);
}

}  // namespace versenet
