#include "versenet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "versenet/errors.hpp"
#include "versenet/text.hpp"

namespace versenet {

namespace {

std::vector<const Poem*> as_pointers(const std::vector<Poem>& poems) {
    std::vector<const Poem*> out;
    out.reserve(poems.size());
    for (const auto& p : poems) out.push_back(&p);
    return out;
}

void check_n(int n) {
    if (n != 1 && n != 2) throw ConfigError("n must be 1 or 2, got " + std::to_string(n));
}

}  // namespace

double distinct_n(const std::vector<const Poem*>& poems, int n) {
    check_n(n);
    if (poems.empty()) throw EmptyInput("distinct_n over an empty poem set");
    std::set<std::string> types;
    std::size_t occurrences = 0;
    for (const auto* p : poems) {
        const auto tokens = tokenize(p->text);
        if (n == 1) {
            for (const auto& t : tokens) types.insert(t);
            occurrences += tokens.size();
        } else {
            for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
                types.insert(tokens[i] + "\t" + tokens[i + 1]);
                ++occurrences;
            }
        }
    }
    if (occurrences == 0) throw EmptyInput("poem set has no n-grams");
    return static_cast<double>(types.size()) / static_cast<double>(occurrences);
}

double distinct_n(const std::vector<Poem>& poems, int n) { return distinct_n(as_pointers(poems), n); }

double novelty_n(const std::vector<const Poem*>& poems, const ReferenceSet& reference, int n) {
    check_n(n);
    if (poems.empty()) throw EmptyInput("novelty_n over an empty poem set");
    if (reference.unigrams.empty()) throw MissingReference("reference set is empty");

    std::size_t novel = 0;
    std::size_t total_tokens = 0;
    for (const auto* p : poems) {
        const auto tokens = tokenize(p->text);
        total_tokens += tokens.size();
        if (n == 1) {
            for (const auto& t : tokens) {
                if (reference.unigrams.find(t) == reference.unigrams.end()) ++novel;
            }
        } else {
            for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
                if (reference.bigrams.find({tokens[i], tokens[i + 1]}) == reference.bigrams.end()) {
                    ++novel;
                }
            }
        }
    }
    if (total_tokens == 0) throw EmptyInput("poem set has no tokens");
    return static_cast<double>(novel) / static_cast<double>(total_tokens);
}

double novelty_n(const std::vector<Poem>& poems, const ReferenceSet& reference, int n) {
    return novelty_n(as_pointers(poems), reference, n);
}

GroupSimilarityReport group_similarity(const PoemPool& pool, const SignedNetwork& net,
                                       EmbeddingProvider& embed, std::size_t max_pairs,
                                       SeededRng& rng) {
    const auto& poems = pool.poems;
    if (poems.size() < 2) throw DegeneratePool("need at least two poems");

    // all unordered pairs with distinct authoring agents
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < poems.size(); ++i) {
        for (std::size_t j = i + 1; j < poems.size(); ++j) {
            if (poems[i].agent != poems[j].agent) pairs.emplace_back(i, j);
        }
    }
    if (pairs.empty()) throw DegeneratePool("no distinct-author pairs available");

    if (max_pairs < pairs.size()) {
        const auto picked = rng.sample_indices(pairs.size(), max_pairs);
        std::vector<std::pair<std::size_t, std::size_t>> sampled;
        sampled.reserve(max_pairs);
        for (std::size_t k : picked) sampled.push_back(pairs[k]);
        pairs = std::move(sampled);
    }

    std::vector<std::string> texts;
    texts.reserve(poems.size());
    for (const auto& p : poems) texts.push_back(p.text);
    const auto vectors = embed.embed(texts);

    GroupSimilarityReport report;
    double in_sum = 0.0, out_sum = 0.0;
    for (const auto& [i, j] : pairs) {
        const double sim = cosine(vectors[i], vectors[j]);
        if (net.group_of(poems[i].agent) == net.group_of(poems[j].agent)) {
            in_sum += sim;
            ++report.in_pairs;
        } else {
            out_sum += sim;
            ++report.out_pairs;
        }
    }
    if (report.in_pairs == 0 || report.out_pairs == 0) {
        throw DegeneratePool("need at least one in-group and one out-group pair");
    }
    report.in_group_mean = in_sum / static_cast<double>(report.in_pairs);
    report.out_group_mean = out_sum / static_cast<double>(report.out_pairs);
    return report;
}

const std::set<std::string>& default_historical_lexicon() {
    static const std::set<std::string> kLexicon{"thy",  "thou",    "thee", "hath", "dost",
                                                "art",  "seekest", "wilt", "ye",   "o'er"};
    return kLexicon;
}

double lexicon_rate(const std::vector<const Poem*>& poems, const std::set<std::string>& lexicon) {
    if (lexicon.empty()) throw EmptyInput("lexicon is empty");
    if (poems.empty()) throw EmptyInput("lexicon_rate over an empty poem set");
    std::set<std::string> needles;
    for (const auto& w : lexicon) needles.insert(to_lower(w));

    std::size_t hits = 0;
    for (const auto* p : poems) {
        for (const auto& tok : tokenize(p->text)) {
            if (needles.count(tok) > 0) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(poems.size());
}

double lexicon_rate(const std::vector<Poem>& poems, const std::set<std::string>& lexicon) {
    return lexicon_rate(as_pointers(poems), lexicon);
}

double aggregate_by_agent(const std::map<AgentId, double>& per_agent_values) {
    if (per_agent_values.empty()) throw EmptyInput("no per-agent values");
    double sum = 0.0;
    for (const auto& [_, v] : per_agent_values) sum += v;
    return sum / static_cast<double>(per_agent_values.size());
}

namespace {

StabilityCell mean_and_std(const std::vector<double>& values) {
    StabilityCell cell;
    const double n = static_cast<double>(values.size());
    for (double v : values) cell.mean += v;
    cell.mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - cell.mean) * (v - cell.mean);
    cell.std_dev = std::sqrt(var / n);
    return cell;
}

}  // namespace

StabilityReport stability(const std::vector<StatTable>& runs) {
    if (runs.size() < 2) throw MisalignedRuns("stability needs at least 2 runs");
    const auto& shape = runs.front().cells;
    for (const auto& run : runs) {
        if (run.cells.size() != shape.size()) throw MisalignedRuns("runs report different statistics");
        for (const auto& [stat, by_iter] : run.cells) {
            auto it = shape.find(stat);
            if (it == shape.end() || it->second.size() != by_iter.size()) {
                throw MisalignedRuns("statistic " + stat + " is misaligned across runs");
            }
            for (const auto& [iter, _] : by_iter) {
                if (it->second.find(iter) == it->second.end()) {
                    throw MisalignedRuns("iteration " + std::to_string(iter) +
                                         " of statistic " + stat + " is misaligned");
                }
            }
        }
    }

    StabilityReport report;
    for (const auto& [stat, by_iter] : shape) {
        std::vector<double> run_means;
        for (const auto& run : runs) {
            const auto& cells = run.cells.at(stat);
            double mean = 0.0;
            for (const auto& [_, v] : cells) mean += v;
            run_means.push_back(mean / static_cast<double>(cells.size()));
        }
        report.aggregate[stat] = mean_and_std(run_means);

        for (const auto& [iter, _] : by_iter) {
            std::vector<double> values;
            for (const auto& run : runs) values.push_back(run.cells.at(stat).at(iter));
            report.per_iteration[stat][iter] = mean_and_std(values);
        }
    }
    return report;
}

}  // namespace versenet
