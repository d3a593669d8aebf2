#ifndef HITL_ACQUISITION_HPP
#define HITL_ACQUISITION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "errors.hpp"
#include "gp.hpp"
#include "pareto.hpp"
#include "sobol.hpp"

namespace hitl {

struct AcquisitionConfig {
    int q = 1;
    std::size_t mc_samples = 512;
    int restart_candidates = 2024;
    int top_restarts = 10;
    int local_steps = 2;           // coordinate sweeps per refined restart
    int golden_iterations = 10;    // golden-section shrink steps per coordinate
    std::uint64_t seed = 0;
    Point reference_point;         // empty -> -1.1 per objective

    void validate() const {
        if (q != 1) throw ConfigError("only q = 1 is supported");
        if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
        if (top_restarts < 1 || restart_candidates < top_restarts)
            throw ConfigError("need restart_candidates >= top_restarts >= 1");
        if (local_steps < 0 || golden_iterations < 0) throw ConfigError("local search budgets must be nonnegative");
    }
};

inline nlohmann::json to_json(const AcquisitionConfig& c) {
    return {{"q", c.q},
            {"mc_samples", c.mc_samples},
            {"restart_candidates", c.restart_candidates},
            {"top_restarts", c.top_restarts},
            {"local_steps", c.local_steps},
            {"golden_iterations", c.golden_iterations},
            {"seed", c.seed},
            {"reference_point", c.reference_point}};
}

/// Reads any subset of the config keys; missing keys keep their defaults.
inline AcquisitionConfig acquisition_config_from_json(const nlohmann::json& j, AcquisitionConfig c = {}) {
    c.q = j.value("q", c.q);
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    c.restart_candidates = j.value("restart_candidates", c.restart_candidates);
    c.top_restarts = j.value("top_restarts", c.top_restarts);
    c.local_steps = j.value("local_steps", c.local_steps);
    c.golden_iterations = j.value("golden_iterations", c.golden_iterations);
    c.seed = j.value("seed", c.seed);
    c.reference_point = j.value("reference_point", c.reference_point);
    c.validate();
    return c;
}

struct EhviEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo expected hypervolume improvement for a single candidate.
///
/// The non-dominated region above the reference point is split into boxes once;
/// each posterior draw's improvement is the volume of its dominated box that
/// falls inside that region. All candidates share one set of standard-normal
/// base samples drawn from the seed, so the estimate is a deterministic,
/// piecewise-smooth function of x.
class EhviEvaluator {
public:
    EhviEvaluator(const SurrogateModel& model, const std::vector<Point>& front, const AcquisitionConfig& cfg)
        : model_(model), m_(model.num_outputs()), front_(front) {
        cfg.validate();
        Point ref = cfg.reference_point.empty() ? Point(m_, -1.1) : cfg.reference_point;
        if (ref.size() != m_) throw ConfigError("reference point dimension does not match the model outputs");
        for (const auto& p : front_) {
            if (p.size() != m_) throw ConfigError("front dimension does not match the model outputs");
            for (std::size_t j = 0; j < m_; ++j)
                if (!(ref[j] < p[j])) throw ConfigError("reference point not strictly dominated by the front");
        }
        const auto boxes = dominated_partition(front_, ref, Point(m_, std::numeric_limits<double>::infinity()));
        for (const auto& b : boxes) {
            lower_.insert(lower_.end(), b.lower.begin(), b.lower.end());
            upper_.insert(upper_.end(), b.upper.begin(), b.upper.end());
        }
        num_boxes_ = boxes.size();

        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        n_ = cfg.mc_samples;
        z_.resize(n_ * m_);
        for (auto& v : z_) v = normal(rng);
        z_max_.assign(m_, -std::numeric_limits<double>::infinity());
        for (std::size_t s = 0; s < n_; ++s)
            for (std::size_t j = 0; j < m_; ++j) z_max_[j] = std::max(z_max_[j], z_[s * m_ + j]);
    }

    std::size_t num_boxes() const { return num_boxes_; }

    EhviEstimate operator()(const Eigen::VectorXd& x) const {
        if (x.size() != model_.dim()) throw ConfigError("candidate dimension mismatch");
        if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) throw BoundsError("", "candidate outside the unit cube");
        std::vector<double> mu(m_), sd(m_), ymax(m_);
        for (std::size_t j = 0; j < m_; ++j) {
            const auto [mean, var] = model_.outputs[j].predict(x);
            mu[j] = mean;
            sd[j] = std::sqrt(var);
            ymax[j] = mean + sd[j] * z_max_[j];
        }
        // Boxes no draw can reach contribute nothing.
        std::vector<std::size_t> live;
        for (std::size_t b = 0; b < num_boxes_; ++b) {
            bool reach = true;
            for (std::size_t j = 0; j < m_ && reach; ++j) reach = lower_[b * m_ + j] < ymax[j];
            if (reach) live.push_back(b);
        }
        if (live.empty()) return {};

        std::vector<double> y(m_);
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t s = 0; s < n_; ++s) {
            for (std::size_t j = 0; j < m_; ++j) y[j] = mu[j] + sd[j] * z_[s * m_ + j];
            bool dominated = false;
            for (const auto& p : front_) {
                if (weakly_dominates(p, y)) {
                    dominated = true;
                    break;
                }
            }
            if (dominated) continue;
            double imp = 0.0;
            for (std::size_t b : live) {
                const double* lo = &lower_[b * m_];
                const double* hi = &upper_[b * m_];
                double v = 1.0;
                for (std::size_t j = 0; j < m_; ++j) {
                    const double len = std::min(y[j], hi[j]) - lo[j];
                    if (len <= 0.0) {
                        v = 0.0;
                        break;
                    }
                    v *= len;
                }
                imp += v;
            }
            sum += imp;
            sum_sq += imp * imp;
        }
        const double n = static_cast<double>(n_);
        const double mean = sum / n;
        const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
        return {mean, std::sqrt(var / n)};
    }

private:
    const SurrogateModel& model_;
    std::size_t m_;
    std::vector<Point> front_;
    std::vector<double> lower_, upper_;
    std::size_t num_boxes_ = 0;
    std::size_t n_ = 0;
    std::vector<double> z_;
    std::vector<double> z_max_;
};

inline EhviEstimate ehvi(const Eigen::VectorXd& x, const SurrogateModel& model, const std::vector<Point>& front,
                         const AcquisitionConfig& cfg) {
    return EhviEvaluator(model, front, cfg)(x);
}

struct Proposal {
    Eigen::VectorXd x;
    EhviEstimate acquisition;
    bool flat = false;               // no candidate showed positive improvement
    double best_raw_candidate = 0.0; // best value among the screened candidates
};

/// Keeps proposals off the faces of the cube.
inline constexpr double kInteriorMargin = 1e-6;

namespace detail {

// Maximizes f along coordinate k of x on [margin, 1 - margin]; updates x/best
// only on strict improvement.
template <class F>
void golden_section_coordinate(const F& f, Eigen::VectorXd& x, double& best, Eigen::Index k, int iterations) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = kInteriorMargin, b = 1.0 - kInteriorMargin;
    Eigen::VectorXd probe = x;
    auto eval = [&](double t) {
        probe[k] = t;
        return f(probe).value;
    };
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = eval(c), fd = eval(d);
    double arg = fc >= fd ? c : d, val = std::max(fc, fd);
    for (int it = 0; it < iterations; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = eval(c);
            if (fc > val) val = fc, arg = c;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = eval(d);
            if (fd > val) val = fd, arg = d;
        }
    }
    if (val > best) {
        best = val;
        x[k] = arg;
    }
}

} // namespace detail

/// Screens quasi-random candidates, refines the best few by coordinate-wise
/// golden-section search, and returns the overall argmax.
inline Proposal propose_next(const SurrogateModel& model, const std::vector<Point>& front, const AcquisitionConfig& cfg) {
    cfg.validate();
    const EhviEvaluator acq(model, front, cfg);
    const Eigen::Index d = model.dim();
    SobolSequence sobol(static_cast<int>(d), true, cfg.seed ^ 0x5DEECE66DULL);

    const auto nc = static_cast<std::size_t>(cfg.restart_candidates);
    std::vector<Eigen::VectorXd> cands(nc);
    std::vector<double> vals(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        const auto p = sobol.next();
        cands[i] = Eigen::Map<const Eigen::VectorXd>(p.data(), d)
                       .cwiseMax(kInteriorMargin)
                       .cwiseMin(1.0 - kInteriorMargin);
        vals[i] = acq(cands[i]).value;
    }
    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

    Proposal out;
    out.best_raw_candidate = vals[order[0]];
    if (!(vals[order[0]] > 0.0)) {
        out.x = cands[order[0]];
        out.acquisition = acq(out.x);
        out.flat = true;
        return out;
    }

    Eigen::VectorXd best_x = cands[order[0]];
    double best_val = vals[order[0]];
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_restarts), nc);
    for (std::size_t r = 0; r < top; ++r) {
        Eigen::VectorXd x = cands[order[r]];
        double v = vals[order[r]];
        for (int step = 0; step < cfg.local_steps; ++step) {
            const double before = v;
            for (Eigen::Index k = 0; k < d; ++k) detail::golden_section_coordinate(acq, x, v, k, cfg.golden_iterations);
            if (!(v > before)) break;
        }
        if (v > best_val) {
            best_val = v;
            best_x = x;
        }
    }
    out.x = best_x;
    out.acquisition = acq(best_x);
    return out;
}

} // namespace hitl

#endif // HITL_ACQUISITION_HPP
