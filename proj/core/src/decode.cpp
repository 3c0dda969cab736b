#include "versenet/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "versenet/errors.hpp"

namespace versenet {

namespace {

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NonFiniteLogit(std::string(what) + " contains a non-finite entry");
    }
}

std::vector<double> mean_logits(const std::vector<std::vector<double>>& vs, std::size_t n) {
    std::vector<double> mean(n, 0.0);
    for (const auto& v : vs) {
        if (v.size() != n) throw NonFiniteLogit("logit vector length mismatch");
        check_finite(v, "expert logits");
        for (std::size_t i = 0; i < n; ++i) mean[i] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(vs.size());
    return mean;
}

}  // namespace

Distribution combine_logits(std::span<const double> l_target,
                            const std::vector<std::vector<double>>& l_plus,
                            const std::vector<std::vector<double>>& l_minus, double alpha) {
    if (l_minus.empty()) throw EmptyAntiExperts("no anti-expert logits given");
    check_finite(l_target, "target logits");
    if (!std::isfinite(alpha)) throw NonFiniteLogit("alpha is not finite");

    const std::size_t n = l_target.size();
    std::vector<double> plus_mean;
    if (l_plus.empty()) {
        plus_mean.assign(l_target.begin(), l_target.end());  // negative-only mode
    } else {
        plus_mean = mean_logits(l_plus, n);
    }
    const auto minus_mean = mean_logits(l_minus, n);

    std::vector<double> combined(n);
    for (std::size_t i = 0; i < n; ++i) {
        combined[i] = l_target[i] + alpha * (plus_mean[i] - minus_mean[i]);
        if (!std::isfinite(combined[i])) throw NonFiniteLogit("combined logits are not finite");
    }
    return softmax(combined);
}

TokenId sample_next(const Distribution& dist, const SamplerConfig& sampler, SeededRng& rng) {
    const std::size_t n = dist.size();
    std::vector<double> weights(dist.begin(), dist.end());
    if (sampler.temperature <= 0.0) throw ConfigError("sampler temperature must be > 0");
    if (sampler.temperature != 1.0) {
        const double inv_t = 1.0 / sampler.temperature;
        for (double& w : weights) w = w > 0.0 ? std::pow(w, inv_t) : 0.0;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;  // tie-break toward the lower token index
    });

    std::size_t keep = n;
    if (sampler.top_k > 0) keep = std::min<std::size_t>(keep, static_cast<std::size_t>(sampler.top_k));

    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) total += weights[order[i]];
    if (sampler.top_p < 1.0) {
        // probabilities for the nucleus rule come from the post-temperature,
        // post-top-k renormalized weights
        double cumulative = 0.0;
        for (std::size_t i = 0; i < keep; ++i) {
            cumulative += weights[order[i]] / total;
            if (cumulative >= sampler.top_p) {
                keep = i + 1;
                break;
            }
        }
        total = 0.0;
        for (std::size_t i = 0; i < keep; ++i) total += weights[order[i]];
    }

    if (keep == 0 || total <= 0.0) return static_cast<TokenId>(order[0]);  // argmax guard

    const double u = rng.uniform_real() * total;
    double cdf = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        cdf += weights[order[i]];
        if (u < cdf) return static_cast<TokenId>(order[i]);
    }
    return static_cast<TokenId>(order[keep - 1]);
}

GeneratedText generate_poem(const TrainableLM& target,
                            const std::vector<const TrainableLM*>& in_peers,
                            const std::vector<const TrainableLM*>& out_peers,
                            const DecodeConfig& config, SeededRng& rng,
                            const std::vector<TokenId>& prime) {
    const Vocab& vocab = target.vocab();
    const std::size_t v = static_cast<std::size_t>(vocab.size());
    for (const auto* peer : in_peers) {
        if (static_cast<std::size_t>(peer->vocab().size()) != v) {
            throw NonFiniteLogit("peer vocabulary size differs from target");
        }
    }
    for (const auto* peer : out_peers) {
        if (static_cast<std::size_t>(peer->vocab().size()) != v) {
            throw NonFiniteLogit("peer vocabulary size differs from target");
        }
    }

    constexpr int kMaxAttempts = 6;  // one try plus up to 5 retries on a leading EOS
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<TokenId> context{Vocab::kBos};
        context.insert(context.end(), prime.begin(), prime.end());
        std::vector<TokenId> out;
        int lines = 0;
        bool leading_eos = false;

        for (int step = 0; step < config.sampler.max_tokens; ++step) {
            const auto ctx = std::span<const TokenId>(context);
            const auto l_target = target.logits(ctx);
            Distribution dist;
            if (out_peers.empty()) {
                dist = softmax(l_target);
            } else {
                std::vector<std::vector<double>> l_plus, l_minus;
                for (const auto* peer : in_peers) l_plus.push_back(peer->logits(ctx));
                for (const auto* peer : out_peers) l_minus.push_back(peer->logits(ctx));
                dist = combine_logits(l_target, l_plus, l_minus, config.alpha);
            }

            // Structural specials must never appear inside a poem body.
            double masked_total = 0.0;
            for (TokenId banned : {Vocab::kBos, Vocab::kUnk, Vocab::kPositiveTag, Vocab::kNegativeTag}) {
                dist[static_cast<std::size_t>(banned)] = 0.0;
            }
            for (double p : dist) masked_total += p;
            if (masked_total <= 0.0) {
                const std::size_t body_start = static_cast<std::size_t>(Vocab::kNumSpecials);
                for (std::size_t i = body_start; i < dist.size(); ++i) {
                    dist[i] = 1.0 / static_cast<double>(dist.size() - body_start);
                }
            } else {
                for (double& p : dist) p /= masked_total;
            }

            const TokenId tok = sample_next(dist, config.sampler, rng);
            if (tok == Vocab::kEos) {
                if (step == 0) leading_eos = true;
                break;
            }
            out.push_back(tok);
            context.push_back(tok);
            if (tok == Vocab::kLineBreak) {
                ++lines;
                if (lines >= config.sampler.max_lines) break;
            }
        }

        if (leading_eos || out.empty()) continue;

        GeneratedText result;
        result.tokens = std::move(out);
        result.text = vocab.decode(result.tokens);
        while (!result.text.empty() && result.text.back() == '\n') result.text.pop_back();
        return result;
    }
    throw EmptyGeneration("model kept producing EOS as the first token");
}

}  // namespace versenet
