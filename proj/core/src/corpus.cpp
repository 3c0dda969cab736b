#include "versenet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "versenet/errors.hpp"
#include "versenet/text.hpp"

namespace versenet {

using nlohmann::json;

std::string Quatrain::text() const { return join(lines, "\n"); }

namespace {

Quatrain parse_record(const json& rec, std::size_t line_no) {
    const std::string at = "line " + std::to_string(line_no) + ": ";
    if (!rec.is_object()) throw ParseError(at + "record is not an object");
    if (!rec.contains("text") || !rec["text"].is_string()) {
        throw ParseError(at + "missing string field 'text'");
    }

    Quatrain q;
    q.lines = split_lines(rec["text"].get<std::string>());
    if (q.lines.size() != 4) {
        throw ParseError(at + "expected 4 lines, got " + std::to_string(q.lines.size()));
    }
    for (const auto& line : q.lines) {
        if (tokenize(line).empty()) throw ParseError(at + "blank line in quatrain");
    }

    if (rec.contains("rhyme")) {
        if (!rec["rhyme"].is_string()) throw ParseError(at + "'rhyme' must be a string");
        const std::string rhyme = rec["rhyme"].get<std::string>();
        if (rhyme.size() != 4 ||
            !std::all_of(rhyme.begin(), rhyme.end(),
                         [](unsigned char c) { return std::isalpha(c) != 0; })) {
            throw ParseError(at + "rhyme scheme must be 4 letters, got '" + rhyme + "'");
        }
        q.rhyme = rhyme;
    }
    if (rec.contains("meter")) {
        if (!rec["meter"].is_string()) throw ParseError(at + "'meter' must be a string");
        q.meter = rec["meter"].get<std::string>();
    }
    if (rec.contains("alliteration")) {
        if (!rec["alliteration"].is_number()) throw ParseError(at + "'alliteration' must be a number");
        const double a = rec["alliteration"].get<double>();
        if (a < 0.0 || a > 1.0) {
            throw ParseError(at + "alliteration out of [0,1]: " + std::to_string(a));
        }
        q.alliteration = a;
    }
    return q;
}

}  // namespace

Corpus parse_corpus(const std::string& content, const std::string& origin) {
    Corpus corpus;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            throw ParseError(origin + " line " + std::to_string(line_no) + ": invalid JSON");
        }
        corpus.items.push_back(parse_record(rec, line_no));
    }
    if (corpus.empty()) throw EmptyCorpus(origin + " contains no records");
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str(), path);
}

Corpus dedup_preselect(const Corpus& corpus, EmbeddingProvider& embed, double threshold) {
    if (threshold <= 0.0 || threshold > 1.0) {
        throw ConfigError("dedup threshold must be in (0,1], got " + std::to_string(threshold));
    }
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& q : corpus.items) texts.push_back(q.text());
    const auto vectors = embed.embed(texts);

    Corpus kept;
    std::vector<const EmbeddingVector*> kept_vecs;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        bool duplicate = false;
        for (const auto* v : kept_vecs) {
            if (cosine(vectors[i], *v) > threshold) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            kept.items.push_back(corpus.items[i]);
            kept_vecs.push_back(&vectors[i]);
        }
    }
    return kept;
}

std::vector<Corpus> split_init(const Corpus& corpus, int m, std::size_t subset_size,
                               SeededRng& rng) {
    if (subset_size > corpus.size()) {
        throw SubsetTooLarge("subset size " + std::to_string(subset_size) + " exceeds corpus size " +
                             std::to_string(corpus.size()));
    }
    std::vector<Corpus> subsets;
    subsets.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        auto indices = rng.sample_indices(corpus.size(), subset_size);
        std::sort(indices.begin(), indices.end());  // keep corpus order inside a subset
        Corpus subset;
        subset.items.reserve(subset_size);
        for (std::size_t i : indices) subset.items.push_back(corpus.items[i]);
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

ReferenceSet build_reference(const Corpus& corpus) {
    if (corpus.empty()) throw EmptyCorpus("cannot build a reference set from an empty corpus");
    ReferenceSet ref;
    for (const auto& q : corpus.items) {
        const auto tokens = tokenize(q.text());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            ref.unigrams.insert(tokens[i]);
            if (i + 1 < tokens.size()) ref.bigrams.emplace(tokens[i], tokens[i + 1]);
        }
        ref.total_tokens += tokens.size();
    }
    return ref;
}

void save_reference(const ReferenceSet& ref, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write reference file " + path);
    out << "#total_tokens\t" << ref.total_tokens << "\n";
    for (const auto& u : ref.unigrams) out << u << "\n";
    for (const auto& [a, b] : ref.bigrams) out << a << "\t" << b << "\n";
}

ReferenceSet load_reference(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open reference file " + path);
    ReferenceSet ref;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto tab = line.find('\t');
            if (line.compare(0, tab, "#total_tokens") == 0 && tab != std::string::npos) {
                ref.total_tokens = static_cast<std::size_t>(std::stoull(line.substr(tab + 1)));
            }
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            ref.unigrams.insert(line);
        } else {
            const std::string a = line.substr(0, tab);
            const std::string b = line.substr(tab + 1);
            if (b.find('\t') != std::string::npos) {
                throw ParseError(path + " line " + std::to_string(line_no) + ": too many fields");
            }
            ref.bigrams.emplace(a, b);
        }
    }
    return ref;
}

}  // namespace versenet
