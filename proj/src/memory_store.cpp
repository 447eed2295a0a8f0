#include "expmem/memory_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "expmem/errors.hpp"
#include "expmem/util.hpp"

namespace expmem {

double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("cosine_similarity: zero vector");
    return a.dot(b) / (na * nb);
}

std::uint64_t MemoryStore::append(const ScenarioKey& key, const std::string& summary,
                                  const Embedding& embedding,
                                  const std::string& episode_id,
                                  const std::string& created_at,
                                  const std::string& lesson) {
    std::unique_lock lock(mutex_);
    if (!records_.empty() && embedding.size() != records_.front().embedding.size())
        throw std::invalid_argument("append: embedding dimension mismatch with store");
    if (embedding.size() == 0 || embedding.norm() == 0.0)
        throw std::invalid_argument("append: embedding must be nonzero");

    ExperienceRecord rec;
    rec.id = next_id_++;
    rec.key = key;
    rec.summary = summary;
    rec.lesson = lesson.empty() ? "none" : lesson;
    rec.embedding = embedding;
    rec.episode_id = episode_id;
    rec.created_at = created_at;
    records_.push_back(std::move(rec));
    return records_.back().id;
}

std::size_t MemoryStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

Eigen::Index MemoryStore::dimension() const {
    std::shared_lock lock(mutex_);
    return records_.empty() ? -1 : records_.front().embedding.size();
}

std::optional<ExperienceRecord> MemoryStore::find(std::uint64_t id) const {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_)
        if (r.id == id) return r;
    return std::nullopt;
}

std::vector<ExperienceRecord> MemoryStore::snapshot() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::vector<RetrievalResult> MemoryStore::retrieve_top_k(const Embedding& query,
                                                         std::size_t k) const {
    if (k < 1) throw std::invalid_argument("retrieve_top_k: k must be >= 1");
    const auto records = snapshot();
    if (!records.empty() && query.size() != records.front().embedding.size())
        throw std::invalid_argument("retrieve_top_k: query dimension mismatch");

    std::vector<RetrievalResult> scored;
    scored.reserve(records.size());
    for (const auto& r : records)
        scored.push_back({r, cosine_similarity(query, r.embedding)});

    std::stable_sort(scored.begin(), scored.end(),
                     [](const RetrievalResult& a, const RetrievalResult& b) {
                         if (a.similarity != b.similarity)
                             return a.similarity > b.similarity;
                         return a.record.id < b.record.id;
                     });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<ExperienceRecord> MemoryStore::retrieve_random_k(std::size_t k,
                                                             std::uint64_t seed) const {
    if (k < 1) throw std::invalid_argument("retrieve_random_k: k must be >= 1");
    auto records = snapshot();
    std::mt19937_64 rng(splitmix64(seed));
    // Partial Fisher-Yates: the first min(k, n) slots become the sample.
    const std::size_t take = std::min(k, records.size());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + std::size_t(uniform_below(rng, records.size() - i));
        std::swap(records[i], records[j]);
    }
    records.resize(take);
    return records;
}

std::vector<ExperienceRecord> MemoryStore::retrieve_all() const {
    return snapshot();
}

namespace {

nlohmann::ordered_json record_to_json(const ExperienceRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["instruction"] = r.key.instruction;
    j["scene"] = r.key.scene_description;
    j["summary"] = r.summary;
    j["embedding"] = std::vector<double>(r.embedding.data(),
                                         r.embedding.data() + r.embedding.size());
    j["episode_id"] = r.episode_id;
    j["created_at"] = r.created_at;
    j["lesson"] = r.lesson;
    return j;
}

ExperienceRecord record_from_json(const nlohmann::json& j, long line) {
    try {
        ExperienceRecord r;
        r.id = j.at("id").get<std::uint64_t>();
        r.key.instruction = j.at("instruction").get<std::string>();
        r.key.scene_description = j.at("scene").get<std::string>();
        r.summary = j.at("summary").get<std::string>();
        const auto vals = j.at("embedding").get<std::vector<double>>();
        r.embedding = Eigen::Map<const Embedding>(vals.data(), Eigen::Index(vals.size()));
        r.episode_id = j.at("episode_id").get<std::string>();
        r.created_at = j.at("created_at").get<std::string>();
        r.lesson = j.value("lesson", "none");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad record: ") + e.what(), line);
    }
}

}  // namespace

void MemoryStore::save(std::ostream& out) const {
    for (const auto& r : snapshot()) out << record_to_json(r).dump() << "\n";
}

void MemoryStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    save(out);
}

MemoryStore MemoryStore::load(std::istream& in) {
    MemoryStore store;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError("malformed JSON record", line_no);
        ExperienceRecord rec = record_from_json(j, line_no);
        store.records_.push_back(rec);
        store.next_id_ = std::max(store.next_id_, rec.id + 1);
        if (store.records_.size() > 1 &&
            rec.embedding.size() != store.records_.front().embedding.size())
            throw ParseError("embedding dimension differs from first record", line_no);
    }
    return store;
}

MemoryStore MemoryStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return load(in);
}

}  // namespace expmem
