#include "versenet/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "versenet/errors.hpp"

namespace versenet {

double ce_loss_tokens(const TrainableLM& lm, std::span<const TokenId> framed) {
    if (framed.size() < 2) throw EmptyTrainingSet("sequence has no predicted tokens");
    double loss = 0.0;
    for (std::size_t t = 1; t < framed.size(); ++t) {
        const auto lp = log_softmax(lm.logits(framed.subspan(0, t)));
        loss -= lp[static_cast<std::size_t>(framed[t])];
    }
    return loss;
}

double ce_loss(const TrainableLM& lm, const Poem& poem) {
    const auto framed = frame_text(lm.vocab(), poem.text);
    if (framed.size() < 3) throw EmptyTrainingSet("poem tokenizes to no tokens");
    return ce_loss_tokens(lm, framed);
}

namespace {

struct Leg {
    std::vector<TokenId> tokens;
    std::vector<double> u;      // pre-normalization mean of embedding rows
    double norm = 0.0;
    EmbeddingVector h;          // normalized
};

Leg make_leg(const NeuralLM& lm, const std::vector<TokenId>& tokens) {
    Leg leg;
    leg.tokens = tokens;
    leg.u.assign(lm.dim(), 0.0);
    for (TokenId t : tokens) {
        const double* row = lm.params().data() + lm.embed_offset(t);
        for (std::size_t j = 0; j < lm.dim(); ++j) leg.u[j] += row[j];
    }
    if (!tokens.empty()) {
        for (double& v : leg.u) v /= static_cast<double>(tokens.size());
    }
    double sq = 0.0;
    for (double v : leg.u) sq += v * v;
    leg.norm = std::sqrt(sq);
    if (leg.norm == 0.0) throw ZeroEmbedding("a contrastive leg embeds to the zero vector");
    leg.h = leg.u;
    for (double& v : leg.h) v /= leg.norm;
    return leg;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// d cos(h_a, h_b) / d u_a for unit h's with pre-normalization norm of a.
std::vector<double> cos_grad_wrt(const Leg& a, const Leg& b, double sim) {
    std::vector<double> g(a.h.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = (b.h[j] - sim * a.h[j]) / a.norm;
    return g;
}

void scatter_to_embeddings(const NeuralLM& lm, const Leg& leg, const std::vector<double>& du,
                           double coeff, std::span<double> grad) {
    const double inv = 1.0 / static_cast<double>(leg.tokens.size());
    for (TokenId t : leg.tokens) {
        double* ge = grad.data() + lm.embed_offset(t);
        for (std::size_t j = 0; j < du.size(); ++j) ge[j] += coeff * du[j] * inv;
    }
}

struct ClForward {
    std::vector<Leg> anchors, positives, negatives;
    std::vector<std::vector<double>> sim_pos, sim_neg;  // [j][k]
    std::vector<double> denom;                          // D_j
    double loss = 0.0;
};

ClForward cl_forward(const NeuralLM& lm, const std::vector<TripleTokens>& triples, double tau) {
    if (triples.empty()) throw EmptyTrainingSet("contrastive batch is empty");
    if (tau <= 0.0) throw ConfigError("contrastive temperature must be > 0");
    ClForward f;
    const std::size_t q = triples.size();
    for (const auto& t : triples) {
        f.anchors.push_back(make_leg(lm, t.anchor));
        f.positives.push_back(make_leg(lm, t.positive));
        f.negatives.push_back(make_leg(lm, t.negative));
    }
    f.sim_pos.assign(q, std::vector<double>(q));
    f.sim_neg.assign(q, std::vector<double>(q));
    f.denom.assign(q, 0.0);
    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t k = 0; k < q; ++k) {
            f.sim_pos[j][k] = dot(f.anchors[j].h, f.positives[k].h);
            f.sim_neg[j][k] = dot(f.anchors[j].h, f.negatives[k].h);
            f.denom[j] += std::exp(f.sim_pos[j][k] / tau) + std::exp(f.sim_neg[j][k] / tau);
        }
        f.loss += -f.sim_pos[j][j] / tau + std::log(f.denom[j]);
    }
    f.loss /= static_cast<double>(q);
    if (!std::isfinite(f.loss)) throw NonFiniteLoss("contrastive loss is not finite");
    return f;
}

}  // namespace

double cl_loss(const TrainBatch& batch, const TrainableLM& lm, double tau) {
    if (batch.triples.empty()) throw EmptyTrainingSet("contrastive batch is empty");
    if (tau <= 0.0) throw ConfigError("contrastive temperature must be > 0");
    const std::size_t q = batch.size();

    std::vector<EmbeddingVector> h, hp, hn;
    for (const auto& t : batch.triples) {
        h.push_back(lm.embed_text(t.anchor.text));
        hp.push_back(lm.embed_text(t.positive.text));
        hn.push_back(lm.embed_text(t.negative.text));
    }
    auto is_zero = [](const EmbeddingVector& v) {
        for (double x : v) {
            if (x != 0.0) return false;
        }
        return true;
    };
    for (std::size_t j = 0; j < q; ++j) {
        if (is_zero(h[j]) || is_zero(hp[j]) || is_zero(hn[j])) {
            throw ZeroEmbedding("a contrastive leg embeds to the zero vector");
        }
    }

    double loss = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
        double denom = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            denom += std::exp(cosine(h[j], hp[k]) / tau) + std::exp(cosine(h[j], hn[k]) / tau);
        }
        loss += -cosine(h[j], hp[j]) / tau + std::log(denom);
    }
    return loss / static_cast<double>(q);
}

double cl_loss_grad(const NeuralLM& lm, const std::vector<TripleTokens>& triples, double tau,
                    std::span<double> grad) {
    if (grad.size() != lm.param_count()) throw Error("gradient buffer size mismatch");
    auto f = cl_forward(lm, triples, tau);
    const std::size_t q = triples.size();
    const double inv_q = 1.0 / static_cast<double>(q);

    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t k = 0; k < q; ++k) {
            // positive pair (j, k)
            double coeff = inv_q * (std::exp(f.sim_pos[j][k] / tau) / f.denom[j]) / tau;
            if (j == k) coeff -= inv_q / tau;
            if (coeff != 0.0) {
                scatter_to_embeddings(lm, f.anchors[j],
                                      cos_grad_wrt(f.anchors[j], f.positives[k], f.sim_pos[j][k]),
                                      coeff, grad);
                scatter_to_embeddings(lm, f.positives[k],
                                      cos_grad_wrt(f.positives[k], f.anchors[j], f.sim_pos[j][k]),
                                      coeff, grad);
            }
            // negative pair (j, k)
            const double ncoeff = inv_q * (std::exp(f.sim_neg[j][k] / tau) / f.denom[j]) / tau;
            scatter_to_embeddings(lm, f.anchors[j],
                                  cos_grad_wrt(f.anchors[j], f.negatives[k], f.sim_neg[j][k]),
                                  ncoeff, grad);
            scatter_to_embeddings(lm, f.negatives[k],
                                  cos_grad_wrt(f.negatives[k], f.anchors[j], f.sim_neg[j][k]),
                                  ncoeff, grad);
        }
    }
    return f.loss;
}

std::vector<std::vector<TokenId>> conditioned_prepare(const std::vector<Poem>& poems,
                                                      const AgentTuple& tuple,
                                                      const Vocab& vocab) {
    auto role_of = [&](AgentId agent) -> TokenId {
        if (agent == tuple.target) return Vocab::kPositiveTag;  // self counts as in-group
        for (AgentId a : tuple.in_group) {
            if (a == agent) return Vocab::kPositiveTag;
        }
        for (AgentId a : tuple.out_group) {
            if (a == agent) return Vocab::kNegativeTag;
        }
        throw UnknownProvenance("poem author " + std::to_string(agent) +
                                " is not resolvable against the agent tuple");
    };

    std::vector<std::vector<TokenId>> out;
    out.reserve(poems.size());
    for (const auto& poem : poems) {
        std::vector<TokenId> seq{role_of(poem.agent)};
        const auto body = vocab.encode_text(poem.text);
        seq.insert(seq.end(), body.begin(), body.end());
        out.push_back(std::move(seq));
    }
    return out;
}

namespace {

std::vector<const Poem*> pool_union(const PoemPool& s_t, const PoemPool* s_prev) {
    std::vector<const Poem*> out;
    for (const auto& p : s_t.poems) out.push_back(&p);
    if (s_prev != nullptr) {
        for (const auto& p : s_prev->poems) out.push_back(&p);
    }
    return out;
}

bool authored_by(const Poem& poem, AgentId target, const std::vector<AgentId>& group) {
    if (poem.agent == target) return true;
    return std::find(group.begin(), group.end(), poem.agent) != group.end();
}

std::vector<std::vector<TokenId>> frame_all(const std::vector<std::vector<TokenId>>& bodies) {
    std::vector<std::vector<TokenId>> out;
    out.reserve(bodies.size());
    for (const auto& body : bodies) {
        std::vector<TokenId> framed{Vocab::kBos};
        framed.insert(framed.end(), body.begin(), body.end());
        framed.push_back(Vocab::kEos);
        out.push_back(std::move(framed));
    }
    return out;
}

void train_ce_sequences(TrainableLM& lm, const std::vector<std::vector<TokenId>>& framed,
                        const TrainConfig& config, SeededRng& rng) {
    if (framed.empty()) throw EmptyTrainingSet("no sequences selected for CE training");
    if (lm.kind() == TrainableLM::Kind::kNgram) {
        auto& ngram = static_cast<NgramLM&>(lm);
        for (int e = 0; e < config.epochs; ++e) {
            for (const auto& seq : framed) ngram.accumulate(seq, config.count_weight);
        }
        return;
    }
    auto& neural = static_cast<NeuralLM&>(lm);
    std::vector<double> grad(neural.param_count());
    const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch_size));
    std::vector<std::size_t> order(framed.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < config.epochs; ++e) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<std::vector<TokenId>> minibatch;
            for (std::size_t i = start; i < end; ++i) minibatch.push_back(framed[order[i]]);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = neural.ce_loss_grad(minibatch, grad);
            if (!std::isfinite(loss)) throw DivergenceDetected("CE loss is not finite");
            neural.sgd_step(grad, config.learning_rate);
        }
    }
}

}  // namespace

void update_agent(TrainableLM& lm, const PoemPool& s_t, const PoemPool* s_prev,
                  const AgentTuple& tuple, const TrainConfig& config) {
    if (s_t.poems.empty()) throw EmptyTrainingSet("current pool is empty");
    const bool needs_cl =
        config.loss_mode == LossMode::kCl || config.loss_mode == LossMode::kCePlusCl;
    if (needs_cl && lm.kind() != TrainableLM::Kind::kNeural) {
        throw UnsupportedLoss("contrastive loss modes need the neural backend");
    }

    const Vocab& vocab = lm.vocab();
    const auto pool = pool_union(s_t, s_prev);
    SeededRng rng(derive_seed(config.seed, 0x75706461ULL));

    if (config.loss_mode == LossMode::kCe) {
        std::vector<std::vector<TokenId>> bodies;
        for (const auto* p : pool) {
            if (authored_by(*p, tuple.target, tuple.in_group)) {
                bodies.push_back(vocab.encode_text(p->text));
            }
        }
        train_ce_sequences(lm, frame_all(bodies), config, rng);
        return;
    }

    if (config.loss_mode == LossMode::kCePrefix) {
        std::vector<Poem> all;
        for (const auto* p : pool) all.push_back(*p);
        train_ce_sequences(lm, frame_all(conditioned_prepare(all, tuple, vocab)), config, rng);
        return;
    }

    // Contrastive modes: triples sampled uniformly without replacement per epoch.
    auto& neural = static_cast<NeuralLM&>(lm);
    std::vector<const Poem*> anchors, positives, negatives;
    for (const auto* p : pool) {
        if (p->agent == tuple.target) anchors.push_back(p);
        else if (authored_by(*p, tuple.target, tuple.in_group)) positives.push_back(p);
        else if (authored_by(*p, tuple.target, tuple.out_group)) negatives.push_back(p);
    }
    if (anchors.empty() || positives.empty() || negatives.empty()) {
        throw EmptyTrainingSet("contrastive training needs anchor, positive and negative poems");
    }

    std::vector<std::vector<TokenId>> ce_framed;
    if (config.loss_mode == LossMode::kCePlusCl) {
        std::vector<std::vector<TokenId>> bodies;
        for (const auto* p : pool) {
            if (authored_by(*p, tuple.target, tuple.in_group)) {
                bodies.push_back(vocab.encode_text(p->text));
            }
        }
        ce_framed = frame_all(bodies);
    }

    const std::size_t n_triples = std::min({anchors.size(), positives.size(), negatives.size()});
    const std::size_t q = static_cast<std::size_t>(std::max(1, config.batch_size));
    std::vector<double> grad(neural.param_count());
    std::vector<double> ce_grad(neural.param_count());
    std::size_t ce_cursor = 0;

    for (int e = 0; e < config.epochs; ++e) {
        const auto ai = rng.sample_indices(anchors.size(), n_triples);
        const auto pi = rng.sample_indices(positives.size(), n_triples);
        const auto ni = rng.sample_indices(negatives.size(), n_triples);
        std::vector<TripleTokens> triples(n_triples);
        for (std::size_t j = 0; j < n_triples; ++j) {
            triples[j].anchor = vocab.encode_text(anchors[ai[j]]->text);
            triples[j].positive = vocab.encode_text(positives[pi[j]]->text);
            triples[j].negative = vocab.encode_text(negatives[ni[j]]->text);
        }
        for (std::size_t start = 0; start < triples.size(); start += q) {
            const std::size_t end = std::min(triples.size(), start + q);
            std::vector<TripleTokens> batch(triples.begin() + static_cast<std::ptrdiff_t>(start),
                                            triples.begin() + static_cast<std::ptrdiff_t>(end));
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = config.cl_weight * cl_loss_grad(neural, batch, config.tau, grad);
            for (double& g : grad) g *= config.cl_weight;

            if (config.loss_mode == LossMode::kCePlusCl) {
                std::vector<std::vector<TokenId>> ce_batch;
                const std::size_t take = std::min(q, ce_framed.size());
                for (std::size_t i = 0; i < take; ++i) {
                    ce_batch.push_back(ce_framed[ce_cursor]);
                    ce_cursor = (ce_cursor + 1) % ce_framed.size();
                }
                if (!ce_batch.empty()) {
                    std::fill(ce_grad.begin(), ce_grad.end(), 0.0);
                    loss += neural.ce_loss_grad(ce_batch, ce_grad);
                    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += ce_grad[i];
                }
            }
            if (!std::isfinite(loss)) throw DivergenceDetected("finetuning loss is not finite");
            neural.sgd_step(grad, config.learning_rate);
        }
    }
}

double grad_check(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> params, std::span<const double> analytic_grad,
                  double epsilon) {
    if (epsilon <= 0.0 || epsilon > 1e-2) throw ConfigError("epsilon must be in (0, 1e-2]");
    if (params.size() != analytic_grad.size()) throw Error("gradient size mismatch");

    std::vector<double> theta(params.begin(), params.end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + epsilon;
        const double up = loss(theta);
        theta[i] = saved - epsilon;
        const double down = loss(theta);
        theta[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NonFiniteLoss("loss is not finite near the evaluation point");
        }
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(fd - analytic_grad[i]) / (std::abs(analytic_grad[i]) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace versenet
