#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace expmem {

using Point2 = Eigen::Vector2d;

enum class Approach { kTop, kSideLeft, kSideRight };

const char* to_string(Approach a);
Approach approach_from_string(const std::string& s);

enum class PushDirection { kLeft, kRight };

const char* to_string(PushDirection d);

/// Row-major boolean grid in cell units. Cell (x, y) is bit y*width + x.
struct RasterMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    RasterMask() = default;
    RasterMask(int w, int h) : width(w), height(h), bits(std::size_t(w) * h, 0) {}

    bool at(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height &&
               bits[std::size_t(y) * width + x] != 0;
    }
    void set(int x, int y, bool v = true) {
        bits[std::size_t(y) * width + x] = v ? 1 : 0;
    }
    /// True if the cell under a continuous point is set.
    bool contains(const Point2& p) const;
    std::size_t set_count() const;
    /// Centers of set cells in row-major order (integer coordinates).
    std::vector<Point2> set_cells() const;
    double diagonal() const { return std::hypot(double(width), double(height)); }

    bool operator==(const RasterMask&) const = default;
};

/// Disk mask helper used by the simulator's per-object masks.
RasterMask disk_mask(int width, int height, const Point2& center, double radius);

struct GraspHypothesis {
    Point2 position = Point2::Zero();
    Approach approach = Approach::kTop;
    double confidence = 0.0;  // in [0, 1]

    bool operator==(const GraspHypothesis& o) const {
        return position == o.position && approach == o.approach &&
               confidence == o.confidence;
    }
};

struct Candidate {
    int label = 0;  // 1-based; 0 is reserved for a push start position
    Point2 location = Point2::Zero();
    std::optional<RasterMask> mask;
};

struct CandidateSet {
    std::vector<Candidate> items;
};

/// What the selector backends receive: the base mask plus numbered options.
struct AnnotatedView {
    RasterMask base;
    std::vector<Candidate> candidates;
    std::vector<std::string> descriptions;  // one per candidate

    std::vector<int> labels() const;
};

/// Greedy maximin sampling. Returns k distinct indices into `points`; the
/// first is seed_index, each next maximizes the minimum distance to all
/// previously selected points, ties broken by lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Point2> points,
                                               std::size_t k,
                                               std::size_t seed_index);

/// Spread-out placement options inside a mask. Seeded at the set cell nearest
/// the mask centroid; k is clamped to the number of set cells.
CandidateSet candidate_placements(const RasterMask& mask, std::size_t k);

/// n candidates at start +/- i*step along the x axis, labeled 1..n.
CandidateSet candidate_push_endpoints(const Point2& start, PushDirection direction,
                                      double step, std::size_t n);

/// 1 - min(1, |g - chosen| / diag). 1 at zero distance, 0 once the distance
/// saturates the image diagonal.
double location_score(const GraspHypothesis& g, const Point2& chosen, double diag);

using FeasibilityPredicate = std::function<bool(const GraspHypothesis&)>;

/// Stand-in for inverse-kinematics checks: a grasp is feasible when its
/// position lies inside the rectangle and its approach is permitted.
struct ReachabilityRegion {
    Point2 min = Point2::Zero();
    Point2 max = Point2::Zero();
    bool allow_top = true;
    bool allow_side_left = true;
    bool allow_side_right = true;

    bool feasible(const GraspHypothesis& g) const;
    FeasibilityPredicate predicate() const;
};

/// Index of the feasible hypothesis maximizing confidence * location score
/// (pure confidence argmax when no location was chosen). Lowest index wins
/// ties. Throws NoFeasibleGraspError when the feasible subset is empty.
std::size_t select_grasp(std::span<const GraspHypothesis> hypotheses,
                         const FeasibilityPredicate& feasible,
                         const std::optional<Point2>& chosen, double diag);

/// Packages candidates for a selector backend. Labels must be 1..n.
AnnotatedView annotate(const RasterMask& base, const CandidateSet& candidates);

}  // namespace expmem
