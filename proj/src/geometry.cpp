#include "expmem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "expmem/errors.hpp"
#include "expmem/util.hpp"

namespace expmem {

const char* to_string(Approach a) {
    switch (a) {
        case Approach::kTop: return "top";
        case Approach::kSideLeft: return "side-left";
        case Approach::kSideRight: return "side-right";
    }
    return "top";
}

Approach approach_from_string(const std::string& s) {
    if (s == "top") return Approach::kTop;
    if (s == "side-left") return Approach::kSideLeft;
    if (s == "side-right") return Approach::kSideRight;
    throw std::invalid_argument("unknown approach label: " + s);
}

const char* to_string(PushDirection d) {
    return d == PushDirection::kLeft ? "left" : "right";
}

bool RasterMask::contains(const Point2& p) const {
    const int x = int(std::lround(p.x()));
    const int y = int(std::lround(p.y()));
    return at(x, y);
}

std::size_t RasterMask::set_count() const {
    return std::size_t(std::count(bits.begin(), bits.end(), std::uint8_t(1)));
}

std::vector<Point2> RasterMask::set_cells() const {
    std::vector<Point2> cells;
    cells.reserve(set_count());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (bits[std::size_t(y) * width + x]) cells.emplace_back(x, y);
    return cells;
}

RasterMask disk_mask(int width, int height, const Point2& center, double radius) {
    RasterMask m(width, height);
    const double r2 = radius * radius;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if ((Point2(x, y) - center).squaredNorm() <= r2) m.set(x, y);
    return m;
}

std::vector<int> AnnotatedView::labels() const {
    std::vector<int> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(c.label);
    return out;
}

std::vector<std::size_t> farthest_point_sample(std::span<const Point2> points,
                                               std::size_t k,
                                               std::size_t seed_index) {
    if (points.empty()) throw std::invalid_argument("farthest_point_sample: empty point list");
    if (k < 1 || k > points.size())
        throw std::invalid_argument("farthest_point_sample: k out of range");
    if (seed_index >= points.size())
        throw std::invalid_argument("farthest_point_sample: seed index out of range");

    std::vector<std::size_t> selected;
    selected.reserve(k);
    selected.push_back(seed_index);

    // min_d2[i] = squared distance from points[i] to the selected set.
    std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
    std::vector<char> taken(points.size(), 0);
    taken[seed_index] = 1;

    while (selected.size() < k) {
        const Point2& last = points[selected.back()];
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (taken[i]) continue;
            min_d2[i] = std::min(min_d2[i], (points[i] - last).squaredNorm());
        }
        std::size_t best = points.size();
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (taken[i]) continue;
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        taken[best] = 1;
        selected.push_back(best);
    }
    return selected;
}

namespace {

RasterMask single_cell_mask(int width, int height, const Point2& p) {
    RasterMask m(width, height);
    const int x = std::clamp(int(std::lround(p.x())), 0, width - 1);
    const int y = std::clamp(int(std::lround(p.y())), 0, height - 1);
    m.set(x, y);
    return m;
}

}  // namespace

CandidateSet candidate_placements(const RasterMask& mask, std::size_t k) {
    if (k < 1) throw std::invalid_argument("candidate_placements: k must be >= 1");
    const std::vector<Point2> cells = mask.set_cells();
    if (cells.empty()) throw std::invalid_argument("candidate_placements: empty mask");

    Point2 centroid = Point2::Zero();
    for (const Point2& c : cells) centroid += c;
    centroid /= double(cells.size());

    std::size_t seed = 0;
    double seed_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double d2 = (cells[i] - centroid).squaredNorm();
        if (d2 < seed_d2) {
            seed_d2 = d2;
            seed = i;
        }
    }

    const std::size_t k_eff = std::min(k, cells.size());
    const auto order = farthest_point_sample(cells, k_eff, seed);

    CandidateSet out;
    out.items.reserve(k_eff);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Point2& loc = cells[order[i]];
        out.items.push_back({int(i) + 1, loc,
                             single_cell_mask(mask.width, mask.height, loc)});
    }
    return out;
}

CandidateSet candidate_push_endpoints(const Point2& start, PushDirection direction,
                                      double step, std::size_t n) {
    if (step <= 0.0) throw std::invalid_argument("candidate_push_endpoints: step must be > 0");
    if (n < 1) throw std::invalid_argument("candidate_push_endpoints: count must be >= 1");

    const double sign = direction == PushDirection::kLeft ? -1.0 : 1.0;
    CandidateSet out;
    out.items.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        Point2 p(start.x() + sign * double(i) * step, start.y());
        Candidate c{int(i), p, std::nullopt};
        if (p.x() >= 0.0 && p.y() >= 0.0) {
            const int w = int(std::lround(p.x())) + 1;
            const int h = int(std::lround(p.y())) + 1;
            c.mask = single_cell_mask(w, h, p);
        }
        out.items.push_back(std::move(c));
    }
    return out;
}

double location_score(const GraspHypothesis& g, const Point2& chosen, double diag) {
    if (diag <= 0.0) throw std::invalid_argument("location_score: diag must be > 0");
    const double d = (g.position - chosen).norm();
    return 1.0 - std::min(1.0, d / diag);
}

bool ReachabilityRegion::feasible(const GraspHypothesis& g) const {
    if (g.position.x() < min.x() || g.position.x() > max.x() ||
        g.position.y() < min.y() || g.position.y() > max.y())
        return false;
    switch (g.approach) {
        case Approach::kTop: return allow_top;
        case Approach::kSideLeft: return allow_side_left;
        case Approach::kSideRight: return allow_side_right;
    }
    return false;
}

FeasibilityPredicate ReachabilityRegion::predicate() const {
    return [r = *this](const GraspHypothesis& g) { return r.feasible(g); };
}

std::size_t select_grasp(std::span<const GraspHypothesis> hypotheses,
                         const FeasibilityPredicate& feasible,
                         const std::optional<Point2>& chosen, double diag) {
    std::size_t best = hypotheses.size();
    double best_score = -1.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const GraspHypothesis& g = hypotheses[i];
        if (feasible && !feasible(g)) continue;
        const double s_loc = chosen ? location_score(g, *chosen, diag) : 1.0;
        const double score = g.confidence * s_loc;
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    if (best == hypotheses.size())
        throw NoFeasibleGraspError("select_grasp: no hypothesis passes the feasibility check");
    return best;
}

AnnotatedView annotate(const RasterMask& base, const CandidateSet& candidates) {
    for (std::size_t i = 0; i < candidates.items.size(); ++i) {
        if (candidates.items[i].label != int(i) + 1)
            throw std::invalid_argument("annotate: labels must be consecutive from 1");
    }
    AnnotatedView view;
    view.base = base;
    view.candidates = candidates.items;
    view.descriptions.reserve(candidates.items.size());
    for (const auto& c : candidates.items) {
        view.descriptions.push_back(
            "option " + std::to_string(c.label) + " at (" +
            std::to_string(c.location.x()) + ", " + std::to_string(c.location.y()) + ")");
    }
    return view;
}

}  // namespace expmem
