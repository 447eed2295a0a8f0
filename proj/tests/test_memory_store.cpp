#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "expmem/errors.hpp"
#include "expmem/memory_store.hpp"
#include "expmem/util.hpp"

using namespace expmem;

namespace {

Embedding vec(std::initializer_list<double> values) {
    Embedding v(Eigen::Index(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

Embedding random_unit(std::mt19937_64& rng, Eigen::Index d) {
    Embedding v(d);
    for (Eigen::Index i = 0; i < d; ++i)
        v[i] = double(std::int64_t(rng() % 20001) - 10000) / 10000.0;
    if (v.norm() == 0.0) v[0] = 1.0;
    return v / v.norm();
}

MemoryStore random_store(std::mt19937_64& rng, std::size_t n, Eigen::Index d) {
    MemoryStore store;
    LogicalClock clock;
    for (std::size_t i = 0; i < n; ++i) {
        store.append({"instr " + std::to_string(i), "scene " + std::to_string(i)},
                     "summary " + std::to_string(i), random_unit(rng, d),
                     "ep" + std::to_string(i), clock.now_rfc3339());
    }
    return store;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
    CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
    CHECK(cosine_similarity(vec({1, 2, 3}), vec({4, 5, 6})) ==
          doctest::Approx(0.974631846).epsilon(1e-9));
    CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), std::invalid_argument);
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), std::invalid_argument);
}

TEST_CASE("append grows the store and fixes the dimension") {
    MemoryStore store;
    CHECK(store.size() == 0);
    CHECK(store.dimension() == -1);

    const auto id = store.append({"put apple", "scene"}, "done", vec({1, 0, 0}),
                                 "ep0", "2025-01-01T00:00:00Z");
    CHECK(store.size() == 1);
    CHECK(store.dimension() == 3);
    CHECK(store.find(id).has_value());
    CHECK_THROWS_AS(store.append({"x", "y"}, "s", vec({1, 0}), "ep1",
                                 "2025-01-01T00:00:01Z"),
                    std::invalid_argument);
}

TEST_CASE("a hundred appends yield distinct monotone ids") {
    std::mt19937_64 rng(1);
    auto store = random_store(rng, 100, 8);
    CHECK(store.size() == 100);
    auto all = store.retrieve_all();
    std::set<std::uint64_t> ids;
    std::uint64_t prev = 0;
    for (const auto& r : all) {
        ids.insert(r.id);
        CHECK(r.id > prev);
        prev = r.id;
    }
    CHECK(ids.size() == 100);
}

TEST_CASE("retrieve_top_k on a single record returns it") {
    MemoryStore store;
    store.append({"a", "b"}, "s", vec({0, 1}), "ep", "2025-01-01T00:00:00Z");
    auto out = store.retrieve_top_k(vec({1, 1}), 5);
    REQUIRE(out.size() == 1);
    CHECK(out[0].record.key.instruction == "a");
}

TEST_CASE("retrieve_top_k matches a brute-force sort") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index d = 4 + Eigen::Index(rng() % 61);
        const std::size_t n = 1 + rng() % 100;
        auto store = random_store(rng, n, d);
        const auto query = random_unit(rng, d);
        const std::size_t k = 1 + rng() % (n + 3);

        auto got = store.retrieve_top_k(query, k);

        // Oracle: score everything, full sort, take the prefix.
        auto all = store.retrieve_all();
        std::vector<std::pair<double, std::uint64_t>> scored;
        for (const auto& r : all)
            scored.push_back({cosine_similarity(query, r.embedding), r.id});
        std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });

        REQUIRE(got.size() == std::min(k, n));
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].record.id == scored[i].second);
            CHECK(got[i].similarity == doctest::Approx(scored[i].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("every record is most similar to itself") {
    std::mt19937_64 rng(5);
    auto store = random_store(rng, 40, 16);
    for (const auto& r : store.retrieve_all()) {
        CHECK(cosine_similarity(r.embedding, r.embedding) ==
              doctest::Approx(1.0).epsilon(1e-9));
        auto top = store.retrieve_top_k(r.embedding, 1);
        REQUIRE(top.size() == 1);
        CHECK(top[0].similarity >= cosine_similarity(top[0].record.embedding, r.embedding) - 1e-12);
    }
}

TEST_CASE("retrieve_top_k is invariant under positive query scaling") {
    std::mt19937_64 rng(17);
    auto store = random_store(rng, 64, 12);
    auto q = random_unit(rng, 12);
    auto a = store.retrieve_top_k(q, 7);
    auto b = store.retrieve_top_k(Embedding(q * 37.5), 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].record.id == b[i].record.id);
}

TEST_CASE("retrieve_random_k is deterministic per seed and covers all on large k") {
    std::mt19937_64 rng(3);
    auto store = random_store(rng, 10, 8);

    auto s1 = store.retrieve_random_k(4, 777);
    auto s2 = store.retrieve_random_k(4, 777);
    REQUIRE(s1.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(s1[i].id == s2[i].id);
    std::set<std::uint64_t> distinct;
    for (const auto& r : s1) distinct.insert(r.id);
    CHECK(distinct.size() == 4);

    auto all = store.retrieve_random_k(25, 1);
    CHECK(all.size() == 10);
}

TEST_CASE("retrieve_random_k draws roughly uniformly") {
    std::mt19937_64 rng(8);
    auto store = random_store(rng, 10, 8);
    std::vector<int> hits(11, 0);
    const int draws = 1000;
    for (int s = 0; s < draws; ++s) {
        auto one = store.retrieve_random_k(1, std::uint64_t(s));
        REQUIRE(one.size() == 1);
        hits[one[0].id] += 1;
    }
    for (std::uint64_t id = 1; id <= 10; ++id) {
        const double freq = double(hits[id]) / draws;
        CHECK(freq > 0.05);   // 10% expected, +/-5%
        CHECK(freq < 0.15);
    }
}

TEST_CASE("retrieve_all preserves insertion order and matches top-k as a set") {
    std::mt19937_64 rng(11);
    MemoryStore empty;
    CHECK(empty.retrieve_all().empty());

    auto store = random_store(rng, 3, 8);
    auto all = store.retrieve_all();
    REQUIRE(all.size() == 3);
    CHECK(all[0].key.instruction == "instr 0");
    CHECK(all[2].key.instruction == "instr 2");

    auto top = store.retrieve_top_k(random_unit(rng, 8), 3);
    std::set<std::uint64_t> a, b;
    for (const auto& r : all) a.insert(r.id);
    for (const auto& r : top) b.insert(r.record.id);
    CHECK(a == b);
}

TEST_CASE("save/load round-trips records exactly") {
    std::mt19937_64 rng(1234);
    auto store = random_store(rng, 100, 24);

    std::stringstream buf;
    store.save(buf);
    auto loaded = MemoryStore::load(buf);

    REQUIRE(loaded.size() == store.size());
    auto a = store.retrieve_all();
    auto b = loaded.retrieve_all();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        // Bit-identical embeddings, not merely approximately equal.
        for (Eigen::Index j = 0; j < a[i].embedding.size(); ++j)
            CHECK(std::memcmp(&a[i].embedding[j], &b[i].embedding[j], sizeof(double)) == 0);
    }

    // Appends after load continue the id sequence.
    auto id = loaded.append({"new", "scene"}, "s", random_unit(rng, 24), "ep",
                            "2025-01-01T00:02:00Z");
    CHECK(id == 101);
}

TEST_CASE("empty store round-trip") {
    MemoryStore store;
    std::stringstream buf;
    store.save(buf);
    auto loaded = MemoryStore::load(buf);
    CHECK(loaded.size() == 0);
}

TEST_CASE("load reports the offending line") {
    std::stringstream buf;
    buf << R"({"id":1,"instruction":"a","scene":"b","summary":"s","embedding":[1.0],"episode_id":"e","created_at":"2025-01-01T00:00:00Z"})"
        << "\n";
    buf << "{\"id\":2,\"instruction\":\"trunc";  // truncated record
    try {
        MemoryStore::load(buf);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load ignores unknown fields") {
    std::stringstream buf;
    buf << R"({"id":1,"instruction":"a","scene":"b","summary":"s","embedding":[0.5,0.5],"episode_id":"e","created_at":"2025-01-01T00:00:00Z","future_field":42})"
        << "\n";
    auto loaded = MemoryStore::load(buf);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded.retrieve_all()[0].lesson == "none");
}
