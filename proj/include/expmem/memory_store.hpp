#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace expmem {

using Embedding = Eigen::VectorXd;

/// a.b / (|a||b|). Throws on dimension mismatch or a zero vector.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Retrieval key: the instruction plus the initial scene description.
struct ScenarioKey {
    std::string instruction;
    std::string scene_description;

    std::string key_text() const { return instruction + "\n" + scene_description; }
    bool operator==(const ScenarioKey&) const = default;
};

struct ExperienceRecord {
    std::uint64_t id = 0;
    ScenarioKey key;
    std::string summary;
    std::string lesson;  // structured side channel; "none" when nothing was learned
    Embedding embedding;
    std::string episode_id;
    std::string created_at;  // RFC-3339

    bool operator==(const ExperienceRecord& o) const {
        return id == o.id && key == o.key && summary == o.summary &&
               lesson == o.lesson && episode_id == o.episode_id &&
               created_at == o.created_at && embedding.size() == o.embedding.size() &&
               embedding == o.embedding;
    }
};

struct RetrievalResult {
    ExperienceRecord record;
    double similarity = 0.0;
};

/// Append-only long-term memory. The first append fixes the embedding
/// dimension; reads are concurrent, appends serialized, and retrieval works
/// on a snapshot taken at call time.
class MemoryStore {
public:
    MemoryStore() = default;
    MemoryStore(MemoryStore&& other) noexcept {
        std::unique_lock lock(other.mutex_);
        records_ = std::move(other.records_);
        next_id_ = other.next_id_;
    }
    MemoryStore& operator=(MemoryStore&& other) noexcept {
        if (this != &other) {
            std::scoped_lock lock(mutex_, other.mutex_);
            records_ = std::move(other.records_);
            next_id_ = other.next_id_;
        }
        return *this;
    }

    std::uint64_t append(const ScenarioKey& key, const std::string& summary,
                         const Embedding& embedding, const std::string& episode_id,
                         const std::string& created_at,
                         const std::string& lesson = "none");

    std::size_t size() const;
    Eigen::Index dimension() const;  // -1 while empty
    std::optional<ExperienceRecord> find(std::uint64_t id) const;

    /// min(k, size) results sorted by similarity descending, older record
    /// first on ties.
    std::vector<RetrievalResult> retrieve_top_k(const Embedding& query,
                                                std::size_t k) const;

    /// min(k, size) distinct records sampled uniformly without replacement.
    std::vector<ExperienceRecord> retrieve_random_k(std::size_t k,
                                                    std::uint64_t seed) const;

    /// Every record in insertion order.
    std::vector<ExperienceRecord> retrieve_all() const;

    void save(const std::string& path) const;
    static MemoryStore load(const std::string& path);

    void save(std::ostream& out) const;
    static MemoryStore load(std::istream& in);

private:
    std::vector<ExperienceRecord> snapshot() const;

    mutable std::shared_mutex mutex_;
    std::vector<ExperienceRecord> records_;
    std::uint64_t next_id_ = 1;
};

}  // namespace expmem
