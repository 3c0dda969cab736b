#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "versenet/corpus.hpp"
#include "versenet/embedding.hpp"
#include "versenet/network.hpp"
#include "versenet/poem.hpp"
#include "versenet/rng.hpp"

namespace versenet {

// Unique n-gram types divided by total n-gram occurrences over a poem set;
// bigrams do not cross poem boundaries. n is 1 or 2.
double distinct_n(const std::vector<const Poem*>& poems, int n);
double distinct_n(const std::vector<Poem>& poems, int n);

// Occurrences of n-grams whose type is absent from the pretraining reference,
// divided by the total number of generated tokens.
double novelty_n(const std::vector<const Poem*>& poems, const ReferenceSet& reference, int n);
double novelty_n(const std::vector<Poem>& poems, const ReferenceSet& reference, int n);

struct GroupSimilarityReport {
    double in_group_mean = 0.0;
    double out_group_mean = 0.0;
    std::size_t in_pairs = 0;
    std::size_t out_pairs = 0;
};

// Mean pairwise embedding cosine per group class over up to max_pairs sampled
// distinct-author poem pairs; pass max_pairs >= all pairs for the exhaustive
// mean.
GroupSimilarityReport group_similarity(const PoemPool& pool, const SignedNetwork& net,
                                       EmbeddingProvider& embed, std::size_t max_pairs,
                                       SeededRng& rng);

// Fraction of poems containing at least one lexicon token (case-insensitive,
// token-exact).
double lexicon_rate(const std::vector<const Poem*>& poems, const std::set<std::string>& lexicon);
double lexicon_rate(const std::vector<Poem>& poems, const std::set<std::string>& lexicon);

const std::set<std::string>& default_historical_lexicon();

double aggregate_by_agent(const std::map<AgentId, double>& per_agent_values);

// One run's statistics: statistic name -> iteration -> value.
struct StatTable {
    std::map<std::string, std::map<int, double>> cells;
};

struct StabilityCell {
    double mean = 0.0;
    double std_dev = 0.0;  // population standard deviation
};

struct StabilityReport {
    // statistic -> (mean, std) of the per-run aggregative means
    std::map<std::string, StabilityCell> aggregate;
    // statistic -> iteration -> (mean, std) across runs
    std::map<std::string, std::map<int, StabilityCell>> per_iteration;
};

StabilityReport stability(const std::vector<StatTable>& runs);

}  // namespace versenet
