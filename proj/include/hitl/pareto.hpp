#ifndef HITL_PARETO_HPP
#define HITL_PARETO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace hitl {

using Point = std::vector<double>;

/// Maximization dominance: a >= b everywhere and a != b.
inline bool dominates(const Point& a, const Point& b) {
    bool strictly = false;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] < b[j]) return false;
        if (a[j] > b[j]) strictly = true;
    }
    return strictly;
}

/// a >= b in every coordinate.
inline bool weakly_dominates(const Point& a, const Point& b) {
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j] < b[j]) return false;
    return true;
}

struct ParetoFront {
    std::vector<Point> points;
    std::vector<std::size_t> member_indices;  // into the input/history

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Non-dominated subset in first-occurrence order; duplicates keep the first.
inline ParetoFront pareto_front(const std::vector<Point>& ys) {
    ParetoFront front;
    if (ys.empty()) return front;
    const std::size_t m = ys.front().size();
    for (const auto& y : ys)
        if (y.size() != m) throw ConfigError("pareto_front: mixed objective dimensions");

    for (std::size_t i = 0; i < ys.size(); ++i) {
        bool keep = true;
        for (std::size_t j = 0; j < ys.size() && keep; ++j) {
            if (i == j) continue;
            if (dominates(ys[j], ys[i])) keep = false;
            else if (j < i && ys[j] == ys[i]) keep = false;
        }
        if (keep) {
            front.points.push_back(ys[i]);
            front.member_indices.push_back(i);
        }
    }
    return front;
}

// -- Hypervolume -------------------------------------------------------------

struct HypervolumeConfig {
    Point reference_point;
    std::size_t mc_samples = std::size_t{1} << 17;
    std::uint64_t seed = 0;
    /// Upper corner of the MC sampling box; defaults to the front's
    /// coordinatewise maximum. Fixing it gives common random numbers across fronts.
    Point upper_bound;
};

inline HypervolumeConfig default_hv_config(std::size_t m) {
    HypervolumeConfig cfg;
    cfg.reference_point.assign(m, -1.1);
    return cfg;
}

struct HypervolumeResult {
    double value = 0.0;
    double std_error = 0.0;
    bool exact = true;
};

namespace detail {

// Slicing along the last objective; exact for any m but meant for m <= 3.
inline double hv_slice(std::vector<Point> pts, const Point& ref, std::size_t m) {
    if (pts.empty()) return 0.0;
    if (m == 1) {
        double best = ref[0];
        for (const auto& p : pts) best = std::max(best, p[0]);
        return best - ref[0];
    }
    const std::size_t last = m - 1;
    std::sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) { return a[last] > b[last]; });
    double total = 0.0;
    std::vector<Point> active;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        active.push_back(pts[k]);
        const double hi = pts[k][last];
        const double lo = k + 1 < pts.size() ? pts[k + 1][last] : ref[last];
        if (hi > lo) total += (hi - lo) * hv_slice(active, ref, m - 1);
    }
    return total;
}

inline void check_reference(const std::vector<Point>& pts, const Point& ref) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].size() != ref.size()) throw ConfigError("hypervolume: reference point dimension mismatch");
        for (std::size_t j = 0; j < ref.size(); ++j)
            if (!(ref[j] < pts[i][j]))
                throw ConfigError("hypervolume: reference point not strictly dominated by front member " +
                                  std::to_string(i));
    }
}

} // namespace detail

/// Exact hypervolume; only for m <= 3.
inline double hypervolume_exact(const std::vector<Point>& pts, const Point& ref) {
    if (ref.size() > 3) throw ConfigError("exact hypervolume supports at most 3 objectives");
    detail::check_reference(pts, ref);
    return detail::hv_slice(pts, ref, ref.size());
}

/// Uniform Monte-Carlo estimate in the box [ref, upper].
inline HypervolumeResult hypervolume_mc(const std::vector<Point>& pts, const HypervolumeConfig& cfg) {
    const Point& ref = cfg.reference_point;
    detail::check_reference(pts, ref);
    HypervolumeResult res{0.0, 0.0, false};
    if (pts.empty()) return res;
    const std::size_t m = ref.size();
    Point upper = cfg.upper_bound;
    if (upper.empty()) {
        upper = ref;
        for (const auto& p : pts)
            for (std::size_t j = 0; j < m; ++j) upper[j] = std::max(upper[j], p[j]);
    }
    if (upper.size() != m) throw ConfigError("hypervolume: upper bound dimension mismatch");
    double box = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (upper[j] < ref[j]) throw ConfigError("hypervolume: upper bound below reference point");
        box *= upper[j] - ref[j];
    }
    if (box == 0.0 || cfg.mc_samples == 0) return res;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Point z(m);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < cfg.mc_samples; ++s) {
        for (std::size_t j = 0; j < m; ++j) z[j] = ref[j] + unif(rng) * (upper[j] - ref[j]);
        for (const auto& p : pts) {
            if (weakly_dominates(p, z)) {
                ++hits;
                break;
            }
        }
    }
    const double n = static_cast<double>(cfg.mc_samples);
    const double frac = static_cast<double>(hits) / n;
    res.value = box * frac;
    res.std_error = box * std::sqrt(frac * (1.0 - frac) / n);
    return res;
}

/// Exact for m <= 3, Monte-Carlo otherwise.
inline HypervolumeResult hypervolume(const ParetoFront& front, const HypervolumeConfig& cfg) {
    if (cfg.reference_point.size() <= 3) return {hypervolume_exact(front.points, cfg.reference_point), 0.0, true};
    return hypervolume_mc(front.points, cfg);
}

// -- Box decomposition of the non-dominated region ---------------------------

struct Box {
    Point lower;
    Point upper;

    double volume() const {
        double v = 1.0;
        for (std::size_t j = 0; j < lower.size(); ++j) v *= upper[j] - lower[j];
        return v;
    }
};

/// Disjoint boxes covering the part of [lower, upper] not weakly dominated by
/// any front member. `upper` may contain +infinity.
inline std::vector<Box> dominated_partition(const std::vector<Point>& front, const Point& lower, const Point& upper) {
    const std::size_t m = lower.size();
    if (upper.size() != m) throw ConfigError("dominated_partition: bounds dimension mismatch");
    std::vector<Box> boxes{{lower, upper}};

    // Larger points first tends to carve bigger pieces early and keeps the count down.
    std::vector<Point> pts = front;
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return std::accumulate(a.begin(), a.end(), 0.0) > std::accumulate(b.begin(), b.end(), 0.0);
    });

    std::vector<Box> next;
    for (const auto& p : pts) {
        if (p.size() != m) throw ConfigError("dominated_partition: front dimension mismatch");
        next.clear();
        next.reserve(boxes.size() * 2);
        for (auto& b : boxes) {
            bool hit = true;
            for (std::size_t j = 0; j < m && hit; ++j) hit = b.lower[j] < p[j];
            if (!hit) {
                next.push_back(std::move(b));
                continue;
            }
            // b minus {z <= p}: piece j has z_k <= p_k for k < j and z_j > p_j.
            Box rest = b;
            for (std::size_t j = 0; j < m; ++j) {
                if (rest.upper[j] > p[j]) {
                    Box piece = rest;
                    piece.lower[j] = p[j];
                    next.push_back(std::move(piece));
                    rest.upper[j] = p[j];
                }
            }
        }
        boxes.swap(next);
    }
    return boxes;
}

/// Hypervolume gained by adding y, given the non-dominated partition (whose
/// lower corner is the reference point).
inline double improvement(const std::vector<Box>& partition, const double* y, std::size_t m) {
    double total = 0.0;
    for (const auto& b : partition) {
        double v = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double len = std::min(y[j], b.upper[j]) - b.lower[j];
            if (len <= 0.0) {
                v = 0.0;
                break;
            }
            v *= len;
        }
        total += v;
    }
    return total;
}

// -- Export ---------------------------------------------------------------------

/// CSV with one row per member: objective columns then the observation index.
inline std::string front_csv(const ParetoFront& front, const std::vector<std::string>& objective_names) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    for (const auto& n : objective_names) os << n << ',';
    os << "observation\n";
    for (std::size_t i = 0; i < front.size(); ++i) {
        for (double v : front.points[i]) os << v << ',';
        os << front.member_indices[i] << '\n';
    }
    return os.str();
}

} // namespace hitl

#endif // HITL_PARETO_HPP
