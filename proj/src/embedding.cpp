#include "expmem/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include <json.hpp>

#include "expmem/errors.hpp"
#include "expmem/util.hpp"

namespace expmem {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(char(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

bool blank(const std::string& text) {
    return std::all_of(text.begin(), text.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
    });
}

}  // namespace

LocalEmbedder::LocalEmbedder(Eigen::Index dimension, std::uint64_t hash_seed)
    : name_("local-bag-d" + std::to_string(dimension)),
      dimension_(dimension),
      seed_(hash_seed) {
    if (dimension < 16) throw std::invalid_argument("LocalEmbedder: dimension must be >= 16");
}

Embedding LocalEmbedder::embed(const std::string& text) {
    if (blank(text)) throw std::invalid_argument("embed: empty text");
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw std::invalid_argument("embed: no tokens in text");

    Embedding v = Embedding::Zero(dimension_);
    for (const auto& tok : tokens) {
        const std::uint64_t h = splitmix64(fnv1a64(tok) ^ seed_);
        const auto bucket = Eigen::Index(h % std::uint64_t(dimension_));
        const double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
        v[bucket] += sign;
    }
    const double norm = v.norm();
    // Signed counts can cancel exactly; nudge a deterministic bucket so the
    // result stays usable as a cosine query.
    if (norm == 0.0) {
        v[Eigen::Index(splitmix64(seed_) % std::uint64_t(dimension_))] = 1.0;
        return v;
    }
    return v / norm;
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<HttpTransport> transport,
                               std::string model, std::string api_key,
                               RetryPolicy policy)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      policy_(policy) {}

Embedding RemoteEmbedder::embed(const std::string& text) {
    if (blank(text)) throw std::invalid_argument("embed: empty text");

    nlohmann::json body = {{"model", model_}, {"input", text}};
    HttpHeaders headers = {{"Authorization", "Bearer " + api_key_}};
    const HttpResponse res =
        post_with_retry(*transport_, "/v1/embeddings", body.dump(), headers, policy_);

    nlohmann::json j = nlohmann::json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].empty() ||
        !j["data"][0].contains("embedding"))
        throw ParseError("embeddings response missing data[0].embedding");

    const auto vals = j["data"][0]["embedding"].get<std::vector<double>>();
    if (vals.empty()) throw ParseError("embeddings response carried an empty vector");
    if (dimension_ < 0) dimension_ = Eigen::Index(vals.size());
    if (Eigen::Index(vals.size()) != dimension_)
        throw std::invalid_argument("embed: dimension drifted from " +
                                    std::to_string(dimension_) + " to " +
                                    std::to_string(vals.size()));
    return Eigen::Map<const Embedding>(vals.data(), Eigen::Index(vals.size()));
}

Embedding CachingEmbedder::embed(const std::string& text) {
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
    }
    Embedding v = inner_->embed(text);
    std::lock_guard lock(mutex_);
    return cache_.emplace(text, std::move(v)).first->second;
}

}  // namespace expmem
