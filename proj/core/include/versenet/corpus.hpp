#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "versenet/embedding.hpp"
#include "versenet/rng.hpp"

namespace versenet {

// One four-line training instance. Rhyme/meter/alliteration labels are read
// from the corpus file when present, never computed here.
struct Quatrain {
    std::vector<std::string> lines;  // exactly 4
    std::optional<std::string> rhyme;
    std::optional<std::string> meter;
    std::optional<double> alliteration;

    std::string text() const;
};

struct Corpus {
    std::vector<Quatrain> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

// Uni-/bi-gram inventory of a pretraining corpus; generated n-grams absent
// from it count as novel. Bigrams never cross poem boundaries.
struct ReferenceSet {
    std::set<std::string> unigrams;
    std::set<std::pair<std::string, std::string>> bigrams;
    std::size_t total_tokens = 0;
};

// Line-delimited records: one JSON object per line with fields `text`
// (4 lines joined by "\n") and optional `rhyme`, `meter`, `alliteration`.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(const std::string& content, const std::string& origin);

// Greedy order-preserving near-duplicate removal: an item is dropped when its
// embedding cosine similarity with any already-kept item exceeds `threshold`.
Corpus dedup_preselect(const Corpus& corpus, EmbeddingProvider& embed, double threshold);

// m per-agent initialization subsets, each drawn uniformly without replacement
// within the subset; subsets are sampled independently and may overlap.
std::vector<Corpus> split_init(const Corpus& corpus, int m, std::size_t subset_size,
                               SeededRng& rng);

ReferenceSet build_reference(const Corpus& corpus);

// Text round trip: one n-gram per line, tokens joined by "\t", sorted; a
// leading "#total_tokens\t<N>" metadata line carries the token count.
void save_reference(const ReferenceSet& ref, const std::string& path);
ReferenceSet load_reference(const std::string& path);

}  // namespace versenet
