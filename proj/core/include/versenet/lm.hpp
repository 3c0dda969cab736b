#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "versenet/corpus.hpp"
#include "versenet/embedding.hpp"
#include "versenet/vocab.hpp"

namespace versenet {

// Logits below this floor stand in for ln(0) when smoothing is disabled; the
// value is low enough that exp underflows to exactly zero after the usual
// max-shift, yet combination arithmetic on it stays finite.
inline constexpr double kMinLogit = -1e9;

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

enum class LossMode { kCe, kCl, kCePlusCl, kCePrefix };

const char* loss_mode_name(LossMode mode);
LossMode loss_mode_from_name(const std::string& name);

struct TrainConfig {
    LossMode loss_mode = LossMode::kCe;
    double learning_rate = 0.1;
    int epochs = 1;
    int batch_size = 8;         // also Q, the contrastive mini-batch size
    double tau = 0.5;
    double cl_weight = 1.0;
    double count_weight = 1.0;  // ngram count increment per observed n-gram
    std::uint64_t seed = 0;
};

// Desk-scale stand-in for a finetunable LM: next-token logits over the shared
// vocabulary, token embeddings, and parameter updates.
class TrainableLM {
public:
    enum class Kind { kNgram, kNeural };

    virtual ~TrainableLM() = default;
    virtual Kind kind() const = 0;
    virtual const Vocab& vocab() const = 0;
    virtual std::vector<double> logits(std::span<const TokenId> context) const = 0;
    // Normalized mean of token embeddings; exactly zero for empty input.
    virtual EmbeddingVector embed_tokens(std::span<const TokenId> tokens) const = 0;
    virtual std::unique_ptr<TrainableLM> clone() const = 0;
    virtual void save(std::ostream& out) const = 0;

    EmbeddingVector embed_text(const std::string& text) const;
};

// Additively smoothed count model of fixed order. Supports cross-entropy style
// updates only (count accumulation); embeddings come from a fixed seeded
// random matrix attached at construction.
class NgramLM final : public TrainableLM {
public:
    NgramLM(Vocab vocab, int order, double kappa, std::size_t embed_dim, std::uint64_t embed_seed);

    Kind kind() const override { return Kind::kNgram; }
    const Vocab& vocab() const override { return vocab_; }
    std::vector<double> logits(std::span<const TokenId> context) const override;
    EmbeddingVector embed_tokens(std::span<const TokenId> tokens) const override;
    std::unique_ptr<TrainableLM> clone() const override;
    void save(std::ostream& out) const override;

    // Counts every transition of a framed sequence (first token is the start
    // symbol and is not predicted).
    void accumulate(std::span<const TokenId> framed, double weight);

    int order() const { return order_; }
    double kappa() const { return kappa_; }

private:
    friend std::unique_ptr<TrainableLM> load_lm(std::istream&);
    struct ContextCounts {
        std::map<TokenId, double> counts;
        double total = 0.0;
    };

    std::vector<TokenId> context_key(std::span<const TokenId> context) const;

    Vocab vocab_;
    int order_;
    double kappa_;
    std::size_t embed_dim_;
    std::uint64_t embed_seed_;
    std::map<std::vector<TokenId>, ContextCounts> table_;
};

// Smallest trainable architecture with differentiable embeddings and a
// full-vocabulary output: mean of the last `window` token embeddings, then a
// linear layer. Parameters live in one flat vector (embeddings, output
// weights, output bias) so gradient checking and SGD stay trivial.
class NeuralLM final : public TrainableLM {
public:
    NeuralLM(Vocab vocab, std::size_t dim, std::size_t window, std::uint64_t seed,
             double init_scale = 0.1);

    Kind kind() const override { return Kind::kNeural; }
    const Vocab& vocab() const override { return vocab_; }
    std::vector<double> logits(std::span<const TokenId> context) const override;
    EmbeddingVector embed_tokens(std::span<const TokenId> tokens) const override;
    std::unique_ptr<TrainableLM> clone() const override;
    void save(std::ostream& out) const override;

    std::size_t dim() const { return dim_; }
    std::size_t window() const { return window_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    // Flat parameter layout.
    std::size_t embed_offset(TokenId tok) const { return static_cast<std::size_t>(tok) * dim_; }
    std::size_t output_offset(TokenId tok) const {
        return vocab_size_ * dim_ + static_cast<std::size_t>(tok) * dim_;
    }
    std::size_t bias_offset() const { return 2 * vocab_size_ * dim_; }

    // Mean CE over framed sequences; accumulates the analytic gradient.
    double ce_loss_grad(const std::vector<std::vector<TokenId>>& framed,
                        std::span<double> grad) const;
    void sgd_step(std::span<const double> grad, double learning_rate);

private:
    friend std::unique_ptr<TrainableLM> load_lm(std::istream&);
    std::vector<double> context_vector(std::span<const TokenId> context) const;

    Vocab vocab_;
    std::size_t vocab_size_;
    std::size_t dim_;
    std::size_t window_;
    std::vector<double> params_;
};

// [BOS] + tokens (line breaks preserved) + [EOS].
std::vector<TokenId> frame_text(const Vocab& vocab, const std::string& text);

// exp(mean negative log-likelihood per corpus token); the first position after
// the start symbol is predicted, the end symbol is not appended.
double perplexity(const TrainableLM& lm, const Corpus& corpus);

// Cross-entropy pretraining: count accumulation for the ngram backend, SGD
// steps for the neural backend.
void pretrain(TrainableLM& lm, const Corpus& corpus, int steps, const TrainConfig& config);

// Versioned checkpoint round trip; save -> load is bit-exact.
std::unique_ptr<TrainableLM> load_lm(std::istream& in);
void save_lm_file(const TrainableLM& lm, const std::string& path);
std::unique_ptr<TrainableLM> load_lm_file(const std::string& path);

}  // namespace versenet
