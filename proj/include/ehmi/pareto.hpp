#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ehmi/error.hpp"

namespace ehmi {

// Objective-space points are plain vectors so the same code serves the
// 7-objective engine and lower-dimensional tests. Larger is better everywhere.
using Point = std::vector<double>;

inline constexpr double kReferenceMargin = 0.1;

inline Point default_reference_point(std::size_t dim) {
    return Point(dim, -1.0 - kReferenceMargin);
}

inline bool dominates(std::span<const double> a, std::span<const double> b) {
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strictly = true;
    }
    return strictly;
}

inline bool weakly_dominates(std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] < b[i]) return false;
    return true;
}

/// Indices (ascending) of the non-dominated points. Among exact duplicates
/// only the first occurrence is kept.
inline std::vector<std::size_t> non_dominated_indices(std::span<const Point> points) {
    if (points.empty()) throw Error(ErrorCode::EmptyInput, "pareto front of an empty set");

    // After a stable lexicographic descending sort a point can only be dominated
    // by (or equal to) one that precedes it, and dominance is transitive, so
    // comparing against the survivors so far is enough.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(points[b].begin(), points[b].end(),
                                            points[a].begin(), points[a].end());
    });

    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const Point& p = points[idx];
        const bool covered = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return weakly_dominates(points[k], p);
        });
        if (!covered) kept.push_back(idx);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

struct FrontEntry {
    std::size_t index = 0; // position in the input / session history
    Point value;
};

struct ParetoFront {
    std::vector<FrontEntry> points;
    Point reference_point;

    std::vector<Point> values() const {
        std::vector<Point> out;
        out.reserve(points.size());
        for (const auto& e : points) out.push_back(e.value);
        return out;
    }
};

inline ParetoFront pareto_front(std::span<const Point> points, Point reference_point = {}) {
    if (points.empty()) throw Error(ErrorCode::EmptyInput, "pareto front of an empty set");
    ParetoFront front;
    front.reference_point =
        reference_point.empty() ? default_reference_point(points.front().size()) : std::move(reference_point);
    for (std::size_t i : non_dominated_indices(points)) front.points.push_back({i, points[i]});
    return front;
}

namespace detail {

inline double box_volume(std::span<const double> lo, std::span<const double> hi) {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
    return v;
}

inline void check_reference(std::span<const Point> pts, std::span<const double> ref) {
    for (const auto& p : pts) {
        if (p.size() != ref.size())
            throw Error(ErrorCode::ReferenceViolation, "point/reference dimension mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] < ref[i])
                throw Error(ErrorCode::ReferenceViolation, "front point below the reference point");
        }
    }
}

// Non-dominated filter without the error on empty input.
inline std::vector<Point> nondominated(std::vector<Point> pts) {
    if (pts.empty()) return pts;
    std::vector<Point> out;
    for (std::size_t i : non_dominated_indices(pts)) out.push_back(std::move(pts[i]));
    return out;
}

inline double hv_2d(std::vector<Point> pts, std::span<const double> ref) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a[0] > b[0]; });
    double area = 0.0, best_y = ref[1];
    for (const auto& p : pts) {
        if (p[1] > best_y) {
            area += (p[0] - ref[0]) * (p[1] - best_y);
            best_y = p[1];
        }
    }
    return area;
}

// WFG: HV(P) = sum_i [ vol(p_i) - HV(nd({ min(p_i, p_j) : j > i })) ],
// with points sorted by the last objective so the limit sets shrink quickly.
inline double wfg(std::vector<Point> pts, std::span<const double> ref) {
    if (pts.empty()) return 0.0;
    const std::size_t d = ref.size();
    if (pts.size() == 1) return box_volume(ref, pts[0]);
    if (d == 1) {
        double m = ref[0];
        for (const auto& p : pts) m = std::max(m, p[0]);
        return m - ref[0];
    }
    if (d == 2) return hv_2d(std::move(pts), ref);

    std::sort(pts.begin(), pts.end(), [d](const Point& a, const Point& b) { return a[d - 1] > b[d - 1]; });
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double excl = box_volume(ref, pts[i]);
        if (i + 1 < pts.size()) {
            std::vector<Point> limited;
            limited.reserve(pts.size() - i - 1);
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                Point q(d);
                for (std::size_t k = 0; k < d; ++k) q[k] = std::min(pts[i][k], pts[j][k]);
                limited.push_back(std::move(q));
            }
            excl -= wfg(nondominated(std::move(limited)), ref);
        }
        total += excl;
    }
    return total;
}

} // namespace detail

/// Exact Lebesgue measure of the union of boxes [ref, p].
inline double hypervolume(std::span<const Point> points, std::span<const double> ref) {
    detail::check_reference(points, ref);
    if (points.empty()) return 0.0;
    return detail::wfg(detail::nondominated({points.begin(), points.end()}), ref);
}

inline double hypervolume(const ParetoFront& front) {
    const auto vals = front.values();
    return hypervolume(vals, front.reference_point);
}

struct Box {
    Point lower;
    Point upper;
    double volume() const { return detail::box_volume(lower, upper); }
};

/// Disjoint boxes covering the part of [ref, upper] that no front point dominates.
struct BoxDecomposition {
    std::vector<Box> boxes;
    Point reference_point;
    Point upper_corner;

    double volume() const {
        double v = 0.0;
        for (const auto& b : boxes) v += b.volume();
        return v;
    }
};

namespace detail {

// Recursively subtract the dominated region of each relevant point from `box`.
// Box minus the sub-box [lo, c] splits into d disjoint slabs: slab k keeps
// dims < k inside [lo, c], dim k in [c, hi], dims > k unrestricted.
inline void decompose(Box box, std::vector<const Point*> pts, std::vector<Box>& out) {
    const std::size_t d = box.lower.size();
    std::erase_if(pts, [&](const Point* p) {
        for (std::size_t k = 0; k < d; ++k)
            if ((*p)[k] <= box.lower[k]) return true;
        return false;
    });
    if (pts.empty()) {
        out.push_back(std::move(box));
        return;
    }
    // Cut with the point that covers the most of this box.
    std::size_t best = 0;
    double best_vol = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double v = 1.0;
        for (std::size_t k = 0; k < d; ++k) v *= std::min((*pts[i])[k], box.upper[k]) - box.lower[k];
        if (v > best_vol) {
            best_vol = v;
            best = i;
        }
    }
    Point cut(d);
    for (std::size_t k = 0; k < d; ++k) cut[k] = std::min((*pts[best])[k], box.upper[k]);
    pts.erase(pts.begin() + std::ptrdiff_t(best));

    Point lo = box.lower;
    Point hi = box.upper;
    for (std::size_t k = 0; k < d; ++k) {
        if (cut[k] < box.upper[k]) {
            Box slab{lo, hi};
            slab.lower[k] = cut[k];
            decompose(std::move(slab), pts, out);
        }
        hi[k] = cut[k];
    }
}

} // namespace detail

inline BoxDecomposition box_decomposition(std::span<const Point> front, std::span<const double> ref,
                                          std::span<const double> upper) {
    detail::check_reference(front, ref);
    for (std::size_t k = 0; k < ref.size(); ++k) {
        if (!(upper[k] > ref[k]))
            throw Error(ErrorCode::ReferenceViolation, "upper corner must exceed the reference point");
    }
    BoxDecomposition dec;
    dec.reference_point.assign(ref.begin(), ref.end());
    dec.upper_corner.assign(upper.begin(), upper.end());
    std::vector<const Point*> pts;
    for (const auto& p : front) pts.push_back(&p);
    detail::decompose(Box{dec.reference_point, dec.upper_corner}, std::move(pts), dec.boxes);
    return dec;
}

/// Decomposition up to the +1 corner of normalized objective space.
inline BoxDecomposition box_decomposition(const ParetoFront& front) {
    const auto vals = front.values();
    const Point upper(front.reference_point.size(), 1.0);
    return box_decomposition(vals, front.reference_point, upper);
}

/// Hypervolume gained by adding `y` to the front the decomposition was built from.
inline double hypervolume_improvement(const BoxDecomposition& dec, std::span<const double> y) {
    double total = 0.0;
    const std::size_t d = y.size();
    for (const auto& b : dec.boxes) {
        double v = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double side = std::min(y[k], b.upper[k]) - b.lower[k];
            if (side <= 0.0) {
                v = 0.0;
                break;
            }
            v *= side;
        }
        total += v;
    }
    return total;
}

} // namespace ehmi
