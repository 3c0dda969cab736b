#pragma once

#include <functional>
#include <span>
#include <vector>

#include "versenet/lm.hpp"
#include "versenet/network.hpp"
#include "versenet/poem.hpp"

namespace versenet {

// Mini-batch of (anchor, positive, negative) poems: anchors from the target
// agent, positives from its in-group, negatives from its out-group.
struct TrainBatch {
    struct Triple {
        Poem anchor;
        Poem positive;
        Poem negative;
    };
    std::vector<Triple> triples;

    std::size_t size() const { return triples.size(); }
};

// Token-level cross entropy of a BOS-prefixed, EOS-terminated sequence.
double ce_loss(const TrainableLM& lm, const Poem& poem);
double ce_loss_tokens(const TrainableLM& lm, std::span<const TokenId> framed);

// SimCSE-style contrastive loss over a batch of Q triples with cosine
// similarity and temperature tau, averaged over anchors.
double cl_loss(const TrainBatch& batch, const TrainableLM& lm, double tau);

// Analytic contrastive gradient for the neural backend, accumulated into the
// flat parameter gradient (embedding rows only; output weights are untouched).
// Returns the batch loss. Token sequences are the poem bodies (no BOS/EOS).
struct TripleTokens {
    std::vector<TokenId> anchor;
    std::vector<TokenId> positive;
    std::vector<TokenId> negative;
};
double cl_loss_grad(const NeuralLM& lm, const std::vector<TripleTokens>& triples, double tau,
                    std::span<double> grad);

// Condition-tagged training sequences: <positive> for poems by the target or
// its in-group, <negative> for out-group poems. BOS/EOS framing is added by
// the training step.
std::vector<std::vector<TokenId>> conditioned_prepare(const std::vector<Poem>& poems,
                                                      const AgentTuple& tuple, const Vocab& vocab);

// F_update for one agent: assembles training data from the current pool (and
// the previous one when present) according to the loss mode, then runs
// epochs x batches of updates on the model in place.
void update_agent(TrainableLM& lm, const PoemPool& s_t, const PoemPool* s_prev,
                  const AgentTuple& tuple, const TrainConfig& config);

// Central finite differences against an analytic gradient; returns the max
// over parameters of |fd - g| / (|g| + 1e-12).
double grad_check(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> params, std::span<const double> analytic_grad,
                  double epsilon);

}  // namespace versenet
