#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "versenet/transport.hpp"

namespace versenet {

// Unit-norm sentence embedding; the zero vector stands for empty text.
using EmbeddingVector = std::vector<double>;

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
void l2_normalize(EmbeddingVector& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    // One vector per text, order preserving.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;

    EmbeddingVector embed_one(const std::string& text) { return embed({text})[0]; }
};

// Offline embedder: every token gets a fixed seeded gaussian vector (the same
// construction the ngram backend uses for its embedding table), texts embed to
// the normalized token mean. Deterministic given (dimension, seed).
class InternalEmbedder : public EmbeddingProvider {
public:
    InternalEmbedder(std::size_t dimension, std::uint64_t seed);

    std::size_t dimension() const override { return dimension_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct EmbeddingEndpoint {
    std::string base_url;
    std::string model;
    std::string credential_env;   // name of the env var holding the API key
    int max_retries = 3;
    double backoff_seconds = 0.5;
    double timeout_seconds = 30.0;
    std::size_t batch_size = 64;
};

// Client for an embeddings API speaking {model, input:[texts]} ->
// {data:[{embedding:[floats]}]}. Responses are cached on disk keyed by
// content hash so reruns never re-bill identical texts.
class RemoteEmbedder : public EmbeddingProvider {
public:
    RemoteEmbedder(EmbeddingEndpoint endpoint, std::string cache_path,
                   std::unique_ptr<HttpTransport> transport = nullptr);

    std::size_t dimension() const override { return dimension_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

    std::size_t network_calls() const { return network_calls_; }

private:
    std::vector<EmbeddingVector> fetch_batch(const std::vector<std::string>& texts);
    void load_cache();
    void append_cache(const std::string& key, const EmbeddingVector& vec);

    EmbeddingEndpoint endpoint_;
    std::string cache_path_;
    std::unique_ptr<HttpTransport> transport_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
    std::mutex mutex_;
    std::size_t dimension_ = 0;
    std::size_t network_calls_ = 0;
};

}  // namespace versenet
