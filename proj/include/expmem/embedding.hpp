#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "expmem/http.hpp"
#include "expmem/memory_store.hpp"

namespace expmem {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual const std::string& name() const = 0;
    /// -1 while unknown (remote embedders learn it from the first response).
    virtual Eigen::Index dimension() const = 0;
    virtual Embedding embed(const std::string& text) = 0;
};

/// Deterministic hashed bag-of-tokens embedder: lowercase, split on
/// non-alphanumerics, each token hashed to a signed bucket, counts
/// accumulated, result L2-normalized. Lexically similar texts land near each
/// other, which is all the retrieval pipeline needs from a test double.
class LocalEmbedder : public Embedder {
public:
    LocalEmbedder(Eigen::Index dimension, std::uint64_t hash_seed);
    const std::string& name() const override { return name_; }
    Eigen::Index dimension() const override { return dimension_; }
    Embedding embed(const std::string& text) override;

private:
    std::string name_;
    Eigen::Index dimension_;
    std::uint64_t seed_;
};

/// Client for an OpenAI-compatible POST /v1/embeddings endpoint.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(std::shared_ptr<HttpTransport> transport, std::string model,
                   std::string api_key, RetryPolicy policy = {});
    const std::string& name() const override { return model_; }
    Eigen::Index dimension() const override { return dimension_; }
    Embedding embed(const std::string& text) override;

private:
    std::shared_ptr<HttpTransport> transport_;
    std::string model_;
    std::string api_key_;
    RetryPolicy policy_;
    Eigen::Index dimension_ = -1;
};

/// Caches by exact text so repeated scenario keys trigger at most one
/// backend call. Get-or-insert is atomic under a mutex.
class CachingEmbedder : public Embedder {
public:
    explicit CachingEmbedder(std::shared_ptr<Embedder> inner)
        : inner_(std::move(inner)) {}
    const std::string& name() const override { return inner_->name(); }
    Eigen::Index dimension() const override { return inner_->dimension(); }
    Embedding embed(const std::string& text) override;

private:
    std::shared_ptr<Embedder> inner_;
    std::mutex mutex_;
    std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace expmem
