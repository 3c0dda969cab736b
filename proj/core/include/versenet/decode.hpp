#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "versenet/lm.hpp"
#include "versenet/rng.hpp"

namespace versenet {

struct SamplerConfig {
    double temperature = 1.0;
    int top_k = 0;        // 0 disables
    double top_p = 0.95;  // 1 disables
    int max_tokens = 48;
    int max_lines = 4;    // quatrain
};

struct DecodeConfig {
    double alpha = 2.0;
    int n_agents = 2;
    SamplerConfig sampler;
    std::uint64_t seed = 0;
};

// Normalized next-token probabilities over the shared vocabulary.
using Distribution = std::vector<double>;

// Expert/anti-expert logit combination:
//   softmax( l_target + alpha * (mean(l_plus) - mean(l_minus)) )
// An empty l_plus substitutes [l_target], which models negative-only learning;
// an empty l_minus is an error.
Distribution combine_logits(std::span<const double> l_target,
                            const std::vector<std::vector<double>>& l_plus,
                            const std::vector<std::vector<double>>& l_minus, double alpha);

// Temperature reweighting, then top-k, then top-p truncation, renormalize,
// sample. Truncation ties break toward the lower token index; if truncation
// removes all mass the argmax token is kept.
TokenId sample_next(const Distribution& dist, const SamplerConfig& sampler, SeededRng& rng);

struct GeneratedText {
    std::vector<TokenId> tokens;
    std::string text;
};

// Autoregressive loop over the target plus interactive peers. Stops at EOS,
// max_lines line breaks, or max_tokens. `prime` tokens (e.g. a condition tag)
// are placed after BOS and excluded from the output.
GeneratedText generate_poem(const TrainableLM& target,
                            const std::vector<const TrainableLM*>& in_peers,
                            const std::vector<const TrainableLM*>& out_peers,
                            const DecodeConfig& config, SeededRng& rng,
                            const std::vector<TokenId>& prime = {});

}  // namespace versenet
