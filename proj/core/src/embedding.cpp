#include "versenet/embedding.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "versenet/errors.hpp"
#include "versenet/hash.hpp"
#include "versenet/rng.hpp"
#include "versenet/text.hpp"

namespace versenet {

using nlohmann::json;

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void l2_normalize(EmbeddingVector& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) return;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
}

InternalEmbedder::InternalEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension < 2) throw ConfigError("embedding dimension must be >= 2");
}

std::vector<EmbeddingVector> InternalEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector acc(dimension_, 0.0);
        const auto tokens = tokenize(text);
        for (const auto& tok : tokens) {
            SeededRng rng(derive_seed(seed_, fnv1a64(tok)));
            for (std::size_t j = 0; j < dimension_; ++j) acc[j] += rng.normal();
        }
        if (!tokens.empty()) {
            for (double& x : acc) x /= static_cast<double>(tokens.size());
            l2_normalize(acc);
        }
        out.push_back(std::move(acc));
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(EmbeddingEndpoint endpoint, std::string cache_path,
                               std::unique_ptr<HttpTransport> transport)
    : endpoint_(std::move(endpoint)), cache_path_(std::move(cache_path)),
      transport_(std::move(transport)) {
    if (!transport_) transport_ = make_http_transport(endpoint_.base_url, endpoint_.timeout_seconds);
    load_cache();
}

void RemoteEmbedder::load_cache() {
    if (cache_path_.empty()) return;
    std::ifstream in(cache_path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.contains("key") || !rec.contains("vec")) continue;
        if (rec.value("v", 0) != 1) {
            throw SchemaVersionMismatch("embedding cache " + cache_path_ +
                                        " has unsupported record version");
        }
        EmbeddingVector vec = rec["vec"].get<EmbeddingVector>();
        dimension_ = vec.size();
        cache_[rec["key"].get<std::string>()] = std::move(vec);
    }
}

void RemoteEmbedder::append_cache(const std::string& key, const EmbeddingVector& vec) {
    if (cache_path_.empty()) return;
    std::ofstream out(cache_path_, std::ios::app);
    json rec{{"v", 1}, {"key", key}, {"vec", vec}};
    out << rec.dump() << "\n";
}

std::vector<EmbeddingVector> RemoteEmbedder::fetch_batch(const std::vector<std::string>& texts) {
    json request{{"model", endpoint_.model}, {"input", texts}};
    HttpHeaders headers{{"Content-Type", "application/json"}};
    if (!endpoint_.credential_env.empty()) {
        const char* key = std::getenv(endpoint_.credential_env.c_str());
        if (key == nullptr) {
            throw AuthError("environment variable " + endpoint_.credential_env + " is not set");
        }
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    const std::string body = request.dump();
    HttpResponse resp;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = endpoint_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        ++network_calls_;
        resp = transport_->post("/v1/embeddings", body, headers);
        if (resp.status == 200) break;
        const bool retryable = resp.status == 0 || resp.status == 429 || resp.status >= 500;
        if (!retryable) break;
    }
    if (resp.status == 429) throw RateLimited("embeddings endpoint kept returning 429");
    if (resp.status != 200) {
        throw EmbeddingFailure("embeddings request failed with status " +
                               std::to_string(resp.status) + " " + resp.error);
    }

    json parsed = json::parse(resp.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() ||
        parsed["data"].size() != texts.size()) {
        throw MalformedResponse("embeddings response shape mismatch");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& item : parsed["data"]) {
        if (!item.contains("embedding")) throw MalformedResponse("embeddings item missing vector");
        EmbeddingVector vec = item["embedding"].get<EmbeddingVector>();
        l2_normalize(vec);
        out.push_back(std::move(vec));
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = hex64(fnv1a64(texts[i]));
        auto it = cache_.find(keys[i]);
        if (it != cache_.end()) {
            out[i] = it->second;
        } else {
            missing.push_back(i);
        }
    }

    for (std::size_t start = 0; start < missing.size(); start += endpoint_.batch_size) {
        const std::size_t end = std::min(missing.size(), start + endpoint_.batch_size);
        std::vector<std::string> batch;
        for (std::size_t k = start; k < end; ++k) batch.push_back(texts[missing[k]]);
        auto vecs = fetch_batch(batch);
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t i = missing[k];
            out[i] = vecs[k - start];
            cache_[keys[i]] = out[i];
            append_cache(keys[i], out[i]);
            dimension_ = out[i].size();
        }
    }
    return out;
}

}  // namespace versenet
