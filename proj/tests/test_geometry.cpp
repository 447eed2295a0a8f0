#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "expmem/errors.hpp"
#include "expmem/geometry.hpp"

using namespace expmem;

namespace {

std::vector<Point2> random_points(std::mt19937_64& rng, std::size_t n) {
    std::vector<Point2> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = double(rng() % 10000) / 100.0;
        const double y = double(rng() % 10000) / 100.0;
        pts.emplace_back(x, y);
    }
    return pts;
}

double min_dist2_to(const std::vector<Point2>& pts,
                    const std::vector<std::size_t>& chosen, std::size_t upto,
                    std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < upto; ++j)
        best = std::min(best, (pts[i] - pts[chosen[j]]).squaredNorm());
    return best;
}

// Independent exhaustive argmax of confidence * location score.
std::size_t brute_force_grasp(const std::vector<GraspHypothesis>& hyps,
                              const FeasibilityPredicate& feasible,
                              const std::optional<Point2>& chosen, double diag) {
    std::size_t best = hyps.size();
    double best_score = -1.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        if (feasible && !feasible(hyps[i])) continue;
        double s_loc = 1.0;
        if (chosen) {
            const double d = (hyps[i].position - *chosen).norm();
            s_loc = 1.0 - std::min(1.0, d / diag);
        }
        const double s = hyps[i].confidence * s_loc;
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("fps k=1 returns the seed") {
    std::vector<Point2> pts = {{0, 0}, {1, 0}, {2, 0}};
    CHECK(farthest_point_sample(pts, 1, 0) == std::vector<std::size_t>{0});
}

TEST_CASE("fps follows the greedy maximin rule on a line") {
    // After index 0, point 2 has min-dist 2 vs point 1's 1, so it goes next.
    std::vector<Point2> pts = {{0, 0}, {1, 0}, {2, 0}};
    CHECK(farthest_point_sample(pts, 3, 0) == std::vector<std::size_t>{0, 2, 1});
}

TEST_CASE("fps with k = n is a permutation of all indices") {
    std::mt19937_64 rng(7);
    auto pts = random_points(rng, 17);
    auto order = farthest_point_sample(pts, pts.size(), 5);
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("fps rejects invalid input") {
    std::vector<Point2> none;
    std::vector<Point2> pts = {{0, 0}};
    CHECK_THROWS_AS(farthest_point_sample(none, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(farthest_point_sample(pts, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(farthest_point_sample(pts, 1, 3), std::invalid_argument);
}

TEST_CASE("fps greedy property holds on random point sets") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 64;
        auto pts = random_points(rng, n);
        const std::size_t k = 1 + rng() % n;
        const std::size_t seed = rng() % n;
        auto order = farthest_point_sample(pts, k, seed);

        REQUIRE(order.size() == k);
        CHECK(order[0] == seed);
        std::vector<char> used(n, 0);
        for (auto i : order) {
            CHECK(i < n);
            CHECK(!used[i]);
            used[i] = 1;
        }
        // Every selected point beats every unselected point on min-distance
        // to the prefix before it.
        for (std::size_t step = 1; step < k; ++step) {
            const double picked = min_dist2_to(pts, order, step, order[step]);
            for (std::size_t i = 0; i < n; ++i) {
                if (std::find(order.begin(), order.begin() + step + 1, i) !=
                    order.begin() + step + 1)
                    continue;
                CHECK(picked >= min_dist2_to(pts, order, step, i));
            }
        }
        // Deterministic for fixed input.
        CHECK(farthest_point_sample(pts, k, seed) == order);
    }
}

TEST_CASE("candidate_placements clamps k to the available cells") {
    RasterMask m(1, 1);
    m.set(0, 0);
    auto set = candidate_placements(m, 3);
    REQUIRE(set.items.size() == 1);
    CHECK(set.items[0].label == 1);
    CHECK(set.items[0].location == Point2(0, 0));
}

TEST_CASE("candidate_placements on a strip picks centroid then an endpoint") {
    RasterMask m(10, 1);
    for (int x = 0; x < 10; ++x) m.set(x, 0);
    // Centroid is x=4.5; nearest cells are 4 and 5, tie broken by scan order
    // (cell 4 first). The farthest remaining cell from 4 is 9.
    auto set = candidate_placements(m, 2);
    REQUIRE(set.items.size() == 2);
    CHECK(set.items[0].location == Point2(4, 0));
    CHECK(set.items[1].location == Point2(9, 0));
    CHECK(set.items[0].mask->contains(set.items[0].location));
}

TEST_CASE("candidate_placements centers a full square") {
    RasterMask m(3, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) m.set(x, y);
    auto set = candidate_placements(m, 1);
    REQUIRE(set.items.size() == 1);
    CHECK(set.items[0].location == Point2(1, 1));
}

TEST_CASE("candidate_placements rejects an empty mask") {
    RasterMask m(4, 4);
    CHECK_THROWS_AS(candidate_placements(m, 1), std::invalid_argument);
}

TEST_CASE("push endpoints march right") {
    auto set = candidate_push_endpoints({5, 5}, PushDirection::kRight, 1.0, 3);
    REQUIRE(set.items.size() == 3);
    CHECK(set.items[0].location == Point2(6, 5));
    CHECK(set.items[1].location == Point2(7, 5));
    CHECK(set.items[2].location == Point2(8, 5));
    CHECK(set.items[0].label == 1);
    CHECK(set.items[2].label == 3);
}

TEST_CASE("push endpoints mirror left") {
    auto set = candidate_push_endpoints({5, 5}, PushDirection::kLeft, 2.0, 2);
    REQUIRE(set.items.size() == 2);
    CHECK(set.items[0].location == Point2(3, 5));
    CHECK(set.items[1].location == Point2(1, 5));
}

TEST_CASE("push endpoints support fractional steps") {
    auto set = candidate_push_endpoints({0, 0}, PushDirection::kRight, 0.5, 4);
    REQUIRE(set.items.size() == 4);
    CHECK(set.items[0].location.x() == doctest::Approx(0.5));
    CHECK(set.items[1].location.x() == doctest::Approx(1.0));
    CHECK(set.items[2].location.x() == doctest::Approx(1.5));
    CHECK(set.items[3].location.x() == doctest::Approx(2.0));
}

TEST_CASE("push endpoints reject bad parameters") {
    CHECK_THROWS_AS(candidate_push_endpoints({0, 0}, PushDirection::kRight, 0.0, 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(candidate_push_endpoints({0, 0}, PushDirection::kRight, 1.0, 0),
                    std::invalid_argument);
}

TEST_CASE("location_score examples") {
    GraspHypothesis g{{3, 4}, Approach::kTop, 0.5};
    CHECK(location_score(g, {3, 4}, 10.0) == doctest::Approx(1.0));
    CHECK(location_score(g, {3, 14}, 10.0) == doctest::Approx(0.0));
    CHECK(location_score(g, {3, 6.5}, 10.0) == doctest::Approx(0.75));
    CHECK_THROWS_AS(location_score(g, {0, 0}, 0.0), std::invalid_argument);
}

TEST_CASE("location_score stays in range and decreases along a ray") {
    const Point2 chosen(10, 10);
    double prev = 2.0;
    for (int i = 0; i <= 40; ++i) {
        GraspHypothesis g{{10.0 + i * 0.7, 10.0}, Approach::kTop, 1.0};
        const double s = location_score(g, chosen, 12.0);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(s <= prev);
        if (i == 0) CHECK(s == doctest::Approx(1.0));
        prev = s;
    }
}

TEST_CASE("select_grasp singleton") {
    std::vector<GraspHypothesis> hyps = {{{1, 1}, Approach::kTop, 0.4}};
    CHECK(select_grasp(hyps, nullptr, std::nullopt, 10.0) == 0);
}

TEST_CASE("select_grasp weighs confidence against proximity") {
    // conf 0.9 with s_loc 0.1 (product 0.09) loses to conf 0.5 at the chosen
    // spot (product 0.5).
    const Point2 chosen(0, 0);
    const double diag = 10.0;
    std::vector<GraspHypothesis> hyps = {
        {{9.0, 0.0}, Approach::kTop, 0.9},  // s_loc = 1 - 9/10 = 0.1
        {{0.0, 0.0}, Approach::kTop, 0.5},  // s_loc = 1.0
    };
    CHECK(select_grasp(hyps, nullptr, chosen, diag) == 1);
}

TEST_CASE("select_grasp without a chosen location is a confidence argmax") {
    std::vector<GraspHypothesis> hyps = {
        {{0, 0}, Approach::kTop, 0.2},
        {{5, 5}, Approach::kTop, 0.8},
        {{9, 9}, Approach::kTop, 0.5},
    };
    CHECK(select_grasp(hyps, nullptr, std::nullopt, 10.0) == 1);
}

TEST_CASE("select_grasp raises when nothing is feasible") {
    std::vector<GraspHypothesis> hyps = {{{1, 1}, Approach::kTop, 0.9}};
    auto nothing = [](const GraspHypothesis&) { return false; };
    CHECK_THROWS_AS(select_grasp(hyps, nothing, std::nullopt, 10.0),
                    NoFeasibleGraspError);
}

TEST_CASE("select_grasp matches exhaustive enumeration") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 32;
        std::vector<GraspHypothesis> hyps;
        for (std::size_t i = 0; i < n; ++i) {
            hyps.push_back({{double(rng() % 640) / 10.0, double(rng() % 480) / 10.0},
                            Approach(rng() % 3),
                            double(rng() % 1001) / 1000.0});
        }
        ReachabilityRegion region{{0, 0}, {64, 48}, true, true, (rng() % 2) == 0};
        // Keep at least one hypothesis feasible.
        hyps[0].approach = Approach::kTop;
        std::optional<Point2> chosen;
        if (rng() % 2) chosen = Point2(double(rng() % 64), double(rng() % 48));
        const double diag = std::hypot(64.0, 48.0);

        const auto got = select_grasp(hyps, region.predicate(), chosen, diag);
        const auto want = brute_force_grasp(hyps, region.predicate(), chosen, diag);
        CHECK(got == want);
        CHECK(region.feasible(hyps[got]));

        // Scaling every confidence by a positive constant cannot move the argmax.
        const double c = 0.1 + double(rng() % 100) / 10.0;
        auto scaled = hyps;
        for (auto& h : scaled) h.confidence *= c;
        CHECK(select_grasp(scaled, region.predicate(), chosen, diag) == got);
    }
}

TEST_CASE("infeasible hypotheses are never selected") {
    std::vector<GraspHypothesis> hyps = {
        {{100, 100}, Approach::kTop, 1.0},  // outside the region
        {{5, 5}, Approach::kTop, 0.01},
    };
    ReachabilityRegion region{{0, 0}, {10, 10}};
    CHECK(select_grasp(hyps, region.predicate(), std::nullopt, 10.0) == 1);
}

TEST_CASE("annotate passes labels through") {
    RasterMask base(4, 4);
    base.set(1, 1);

    CandidateSet empty;
    CHECK(annotate(base, empty).labels().empty());

    CandidateSet three;
    three.items = {{1, {0, 0}, std::nullopt},
                   {2, {1, 0}, std::nullopt},
                   {3, {2, 0}, std::nullopt}};
    auto view = annotate(base, three);
    CHECK(view.labels() == std::vector<int>{1, 2, 3});

    CandidateSet bad;
    bad.items = {{2, {0, 0}, std::nullopt}};
    CHECK_THROWS_AS(annotate(base, bad), std::invalid_argument);
}
