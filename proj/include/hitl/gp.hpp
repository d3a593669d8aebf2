#ifndef HITL_GP_HPP
#define HITL_GP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "design_space.hpp"
#include "errors.hpp"
#include "objectives.hpp"

namespace hitl {

enum class Phase { warmstart_seed, sampling, optimization, static_eval };

inline std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::warmstart_seed: return "warmstart-seed";
    case Phase::sampling: return "sampling";
    case Phase::optimization: return "optimization";
    case Phase::static_eval: return "static";
    }
    return "?";
}

inline Phase phase_from_string(std::string_view s) {
    if (s == "warmstart-seed") return Phase::warmstart_seed;
    if (s == "sampling") return Phase::sampling;
    if (s == "optimization") return Phase::optimization;
    if (s == "static") return Phase::static_eval;
    throw ConfigError("unknown phase '" + std::string(s) + "'");
}

/// One rated design. `x` is unit-encoded.
struct Observation {
    DesignPoint x;
    ObjectiveVector y{};
    int iteration = 0;
    Phase phase = Phase::sampling;
    bool operator==(const Observation&) const = default;
};

struct GpHyperparams {
    std::vector<double> lengthscales;
    double signal_variance = 1.0;
    double noise_variance = 1e-4;
    double mean_constant = 0.0;
};

// Fitting box. Lengthscales stop at the cube width, inside the
// admissible envelope [1e-3, 1e3]; override per fit if needed.
struct GpBounds {
    double lengthscale_lo = 1e-3;
    double lengthscale_hi = 1.0;
    double signal_lo = 1e-6;
    double signal_hi = 1e2;
    double noise_lo = 1e-8;
    double noise_hi = 1.0;
    double mean_lo = -10.0;
    double mean_hi = 10.0;
};

struct GpFitConfig {
    int restarts = 8;
    int max_iterations = 200;
    std::uint64_t seed = 0;
    GpBounds bounds{};
};

inline constexpr double kMaxJitter = 1e-4;

/// ARD Matern-5/2 covariance.
inline double matern52(double r, double signal_variance) {
    const double s5r = std::sqrt(5.0) * r;
    return signal_variance * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

/// Packs hyperparameters as [log ls..., log signal, log noise, mean].
inline Eigen::VectorXd pack(const GpHyperparams& h) {
    const auto d = static_cast<Eigen::Index>(h.lengthscales.size());
    Eigen::VectorXd t(d + 3);
    for (Eigen::Index k = 0; k < d; ++k) t[k] = std::log(h.lengthscales[k]);
    t[d] = std::log(h.signal_variance);
    t[d + 1] = std::log(h.noise_variance);
    t[d + 2] = h.mean_constant;
    return t;
}

inline GpHyperparams unpack(const Eigen::VectorXd& t) {
    const Eigen::Index d = t.size() - 3;
    GpHyperparams h;
    h.lengthscales.resize(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) h.lengthscales[k] = std::exp(t[k]);
    h.signal_variance = std::exp(t[d]);
    h.noise_variance = std::exp(t[d + 1]);
    h.mean_constant = t[d + 2];
    return h;
}

/// Log marginal likelihood of one output and its gradient in packed coordinates.
class MarginalLikelihood {
public:
    MarginalLikelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) : X_(X), y_(y) {
        const Eigen::Index n = X.rows(), d = X.cols();
        sq_diff_.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(n, n));
        for (Eigen::Index k = 0; k < d; ++k)
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double diff = X(i, k) - X(j, k);
                    sq_diff_[k](i, j) = diff * diff;
                }
    }

    struct Value {
        double lml = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd grad;
        bool ok = false;
        double jitter = 0.0;
    };

    Value evaluate(const Eigen::VectorXd& theta, bool with_gradient = true) const {
        const Eigen::Index n = X_.rows(), d = X_.cols();
        const GpHyperparams h = unpack(theta);
        Eigen::MatrixXd Kf(n, n);
        Eigen::MatrixXd dk_dr_term(n, n);  // (5/3) sf2 (1 + sqrt5 r) exp(-sqrt5 r)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                double r2 = 0.0;
                for (Eigen::Index k = 0; k < d; ++k) r2 += sq_diff_[k](i, j) / (h.lengthscales[k] * h.lengthscales[k]);
                const double r = std::sqrt(r2);
                const double s5r = std::sqrt(5.0) * r;
                const double e = std::exp(-s5r);
                Kf(i, j) = Kf(j, i) = h.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * e;
                dk_dr_term(i, j) = dk_dr_term(j, i) = h.signal_variance * (5.0 / 3.0) * (1.0 + s5r) * e;
            }

        Value out;
        Eigen::LLT<Eigen::MatrixXd> llt;
        double jitter = 0.0;
        for (;;) {
            Eigen::MatrixXd K = Kf;
            K.diagonal().array() += h.noise_variance + jitter;
            llt.compute(K);
            if (llt.info() == Eigen::Success) break;
            jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
            if (jitter > kMaxJitter * (1.0 + 1e-9)) return out;
        }
        out.jitter = jitter;
        const Eigen::VectorXd resid = y_.array() - h.mean_constant;
        const Eigen::VectorXd alpha = llt.solve(resid);
        const Eigen::MatrixXd L = llt.matrixL();
        const double logdet = 2.0 * L.diagonal().array().log().sum();
        out.lml = -0.5 * resid.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        out.ok = std::isfinite(out.lml);
        if (!with_gradient || !out.ok) return out;

        // d lml / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
        const Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;
        out.grad.resize(d + 3);
        for (Eigen::Index k = 0; k < d; ++k) {
            const double inv_l2 = 1.0 / (h.lengthscales[k] * h.lengthscales[k]);
            out.grad[k] = 0.5 * (W.array() * dk_dr_term.array() * sq_diff_[k].array()).sum() * inv_l2;
        }
        out.grad[d] = 0.5 * (W.array() * Kf.array()).sum();
        out.grad[d + 1] = 0.5 * W.trace() * h.noise_variance;
        out.grad[d + 2] = alpha.sum();
        return out;
    }

private:
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    std::vector<Eigen::MatrixXd> sq_diff_;
};

/// Single-output GP conditioned on shared training inputs.
class GaussianProcess {
public:
    GaussianProcess() = default;

    /// Throws FitError if the kernel matrix stays singular up to the maximum jitter.
    GaussianProcess(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, GpHyperparams h) : X_(X), h_(std::move(h)) {
        const Eigen::Index n = X.rows();
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j)
                K(i, j) = K(j, i) = kernel_at(X.row(i), X.row(j));
        double jitter = 0.0;
        for (;;) {
            Eigen::MatrixXd Kn = K;
            Kn.diagonal().array() += h_.noise_variance + jitter;
            llt_.compute(Kn);
            if (llt_.info() == Eigen::Success) break;
            jitter = jitter == 0.0 ? 1e-8 : jitter * 10.0;
            if (jitter > kMaxJitter * (1.0 + 1e-9)) throw FitError("kernel matrix not positive definite after jitter 1e-4");
        }
        jitter_ = jitter;
        alpha_ = llt_.solve((y.array() - h_.mean_constant).matrix());
    }

    const GpHyperparams& hyperparams() const { return h_; }
    double jitter() const { return jitter_; }
    Eigen::Index num_train() const { return X_.rows(); }
    Eigen::Index dim() const { return X_.cols(); }

    /// Kernel between two points given as vectors or matrix rows.
    template <class A, class B>
    double kernel_at(const A& a, const B& b) const {
        double r2 = 0.0;
        for (Eigen::Index c = 0; c < a.size(); ++c) {
            const double d = (a[c] - b[c]) / h_.lengthscales[static_cast<std::size_t>(c)];
            r2 += d * d;
        }
        return matern52(std::sqrt(r2), h_.signal_variance);
    }

    /// Latent mean and variance at one point.
    std::pair<double, double> predict(const Eigen::VectorXd& x) const {
        const Eigen::Index n = X_.rows();
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_at(X_.row(i), x);
        const double mean = h_.mean_constant + k.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var = std::max(0.0, h_.signal_variance - v.squaredNorm());
        return {mean, var};
    }

    /// Joint latent posterior at the rows of Xs.
    void posterior(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const {
        const Eigen::Index n = X_.rows(), q = Xs.rows();
        Eigen::MatrixXd Ks(n, q);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < q; ++j) Ks(i, j) = kernel_at(X_.row(i), Xs.row(j));
        Eigen::MatrixXd Kss(q, q);
        for (Eigen::Index i = 0; i < q; ++i)
            for (Eigen::Index j = i; j < q; ++j) Kss(i, j) = Kss(j, i) = kernel_at(Xs.row(i), Xs.row(j));
        mean = (Ks.transpose() * alpha_).array() + h_.mean_constant;
        const Eigen::MatrixXd V = llt_.matrixL().solve(Ks);
        cov = Kss - V.transpose() * V;
        cov = 0.5 * (cov + cov.transpose());
    }

private:
    Eigen::MatrixXd X_;
    GpHyperparams h_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

struct FitDiagnostics {
    double lml = 0.0;
    std::vector<double> restart_initial_lml;
    std::vector<double> restart_final_lml;
};

/// One GP per objective over shared unit-cube inputs.
struct SurrogateModel {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    std::vector<GaussianProcess> outputs;
    std::vector<FitDiagnostics> diagnostics;

    std::size_t num_outputs() const { return outputs.size(); }
    Eigen::Index dim() const { return X.cols(); }
};

namespace detail {

inline Eigen::VectorXd lower_bounds(Eigen::Index d, const GpBounds& b) {
    Eigen::VectorXd lo(d + 3);
    lo.head(d).setConstant(std::log(b.lengthscale_lo));
    lo[d] = std::log(b.signal_lo);
    lo[d + 1] = std::log(b.noise_lo);
    lo[d + 2] = b.mean_lo;
    return lo;
}

inline Eigen::VectorXd upper_bounds(Eigen::Index d, const GpBounds& b) {
    Eigen::VectorXd hi(d + 3);
    hi.head(d).setConstant(std::log(b.lengthscale_hi));
    hi[d] = std::log(b.signal_hi);
    hi[d + 1] = std::log(b.noise_hi);
    hi[d + 2] = b.mean_hi;
    return hi;
}

// Projected L-BFGS ascent with backtracking. Only accepts improving steps, so
// the returned value is never below the starting one.
inline MarginalLikelihood::Value maximize_lml(const MarginalLikelihood& f, Eigen::VectorXd& theta,
                                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int max_iter) {
    constexpr int kMemory = 8;
    theta = theta.cwiseMax(lo).cwiseMin(hi);
    auto cur = f.evaluate(theta);
    if (!cur.ok) return cur;
    std::vector<Eigen::VectorXd> s_hist, y_hist;

    auto free_mask = [&](const Eigen::VectorXd& t, const Eigen::VectorXd& g) {
        Eigen::VectorXd mask = Eigen::VectorXd::Ones(t.size());
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            if ((t[i] <= lo[i] && g[i] < 0) || (t[i] >= hi[i] && g[i] > 0)) mask[i] = 0.0;
        }
        return mask;
    };

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd mask = free_mask(theta, cur.grad);
        const Eigen::VectorXd g = cur.grad.cwiseProduct(mask);
        if (g.lpNorm<Eigen::Infinity>() < 1e-7) break;

        // Two-loop recursion on the negated objective.
        Eigen::VectorXd q = -g;
        const std::size_t mem = s_hist.size();
        std::vector<double> a(mem);
        for (std::size_t i = mem; i-- > 0;) {
            const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
            a[i] = rho * s_hist[i].dot(q);
            q -= a[i] * y_hist[i];
        }
        if (mem > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < mem; ++i) {
            const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
            const double b = rho * y_hist[i].dot(q);
            q += (a[i] - b) * s_hist[i];
        }
        Eigen::VectorXd dir = (-q).cwiseProduct(mask);
        if (dir.dot(g) <= 0.0) {
            dir = g;
            s_hist.clear();
            y_hist.clear();
        }
        const double max_step = 2.0 / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
        double step = mem > 0 ? 1.0 : std::min(1.0, max_step);

        bool accepted = false;
        MarginalLikelihood::Value trial;
        Eigen::VectorXd cand;
        for (int ls = 0; ls < 40; ++ls) {
            cand = (theta + step * dir).cwiseMax(lo).cwiseMin(hi);
            trial = f.evaluate(cand);
            if (trial.ok && trial.lml > cur.lml && trial.lml >= cur.lml + 1e-4 * g.dot(cand - theta)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const Eigen::VectorXd s = cand - theta;
        const Eigen::VectorXd yv = cur.grad - trial.grad;  // gradient of -lml
        const double improvement = trial.lml - cur.lml;
        theta = cand;
        const double curv = s.dot(yv);
        cur = std::move(trial);
        if (curv > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            if (static_cast<int>(s_hist.size()) > kMemory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
            }
        }
        if (improvement < 1e-10 * std::max(1.0, std::abs(cur.lml))) break;
    }
    return cur;
}

} // namespace detail

/// MLE hyperparameters for one output via multi-start ascent.
inline GpHyperparams fit_hyperparams(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpFitConfig& cfg,
                                     FitDiagnostics* diag = nullptr) {
    const Eigen::Index d = X.cols();
    const MarginalLikelihood f(X, y);
    const Eigen::VectorXd lo = detail::lower_bounds(d, cfg.bounds), hi = detail::upper_bounds(d, cfg.bounds);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto log_uniform = [&](double a, double b) { return std::log(a) + unif(rng) * (std::log(b) - std::log(a)); };
    const double y_mean = y.mean();

    Eigen::VectorXd best_theta;
    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
        Eigen::VectorXd theta(d + 3);
        for (Eigen::Index k = 0; k < d; ++k) theta[k] = log_uniform(0.1, 10.0);
        theta[d] = log_uniform(0.05, 2.0);
        theta[d + 1] = log_uniform(1e-6, 1e-1);
        theta[d + 2] = y_mean;
        theta = theta.cwiseMax(lo).cwiseMin(hi);
        const auto init = f.evaluate(theta, false);
        const auto res = detail::maximize_lml(f, theta, lo, hi, cfg.max_iterations);
        if (diag) {
            diag->restart_initial_lml.push_back(init.lml);
            diag->restart_final_lml.push_back(res.ok ? res.lml : -std::numeric_limits<double>::infinity());
        }
        if (res.ok && res.lml > best) {
            best = res.lml;
            best_theta = theta;
        }
    }
    if (best_theta.size() == 0) throw FitError("log marginal likelihood could not be evaluated at any restart");
    if (diag) diag->lml = best;
    return unpack(best_theta);
}

inline Eigen::MatrixXd design_matrix(const std::vector<Observation>& history) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(history.size()), static_cast<Eigen::Index>(kNumParams));
    for (std::size_t i = 0; i < history.size(); ++i) {
        const DesignPoint u = to_unit(history[i].x);
        for (std::size_t k = 0; k < kNumParams; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = u.values[k];
    }
    return X;
}

inline Eigen::MatrixXd objective_matrix(const std::vector<Observation>& history) {
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(history.size()), static_cast<Eigen::Index>(kNumObjectives));
    for (std::size_t i = 0; i < history.size(); ++i)
        for (std::size_t j = 0; j < kNumObjectives; ++j) Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = history[i].y[j];
    return Y;
}

/// Fits one GP per column of Y. Requires at least two observations.
inline SurrogateModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GpFitConfig& cfg = {}) {
    if (X.rows() < 2) throw ConfigError("GP fit needs at least 2 observations");
    if (Y.rows() != X.rows()) throw ConfigError("GP fit: X and Y row counts differ");
    if ((X.array() < 0.0).any() || (X.array() > 1.0).any()) throw BoundsError("", "GP inputs must lie in the unit cube");
    SurrogateModel model{X, Y, {}, {}};
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        GpFitConfig c = cfg;
        c.seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(j);
        FitDiagnostics diag;
        GpHyperparams h = fit_hyperparams(X, Y.col(j), c, &diag);
        model.outputs.emplace_back(X, Y.col(j), std::move(h));
        model.diagnostics.push_back(std::move(diag));
    }
    return model;
}

inline SurrogateModel fit(const std::vector<Observation>& history, const GpFitConfig& cfg = {}) {
    return fit(design_matrix(history), objective_matrix(history), cfg);
}

/// Conditions on the data with fixed hyperparameters (no likelihood fitting);
/// works for a single observation.
inline SurrogateModel fit_fixed(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GpHyperparams& h) {
    if (X.rows() < 1) throw ConfigError("GP needs at least 1 observation");
    SurrogateModel model{X, Y, {}, {}};
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        model.outputs.emplace_back(X, Y.col(j), h);
        model.diagnostics.push_back({});
    }
    return model;
}

/// Hyperparameters used when there is too little data to fit them.
inline GpHyperparams default_hyperparams(std::size_t dim) {
    return {std::vector<double>(dim, 1.0), 0.25, 1e-4, 0.0};
}

struct OutputPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Joint posterior per objective at the rows of Xs (unit cube).
inline std::vector<OutputPosterior> posterior(const SurrogateModel& model, const Eigen::MatrixXd& Xs) {
    if ((Xs.array() < 0.0).any() || (Xs.array() > 1.0).any()) throw BoundsError("", "query points must lie in the unit cube");
    std::vector<OutputPosterior> out(model.num_outputs());
    for (std::size_t j = 0; j < model.num_outputs(); ++j) {
        model.outputs[j].posterior(Xs, out[j].mean, out[j].cov);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out[j].cov);
        if (es.eigenvalues().minCoeff() < 0.0) {
            const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
            out[j].cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
            out[j].cov = 0.5 * (out[j].cov + out[j].cov.transpose());
        }
    }
    return out;
}

/// Joint draws per objective: result[j] is (n_samples x rows(Xs)).
inline std::vector<Eigen::MatrixXd> sample_posterior(const SurrogateModel& model, const Eigen::MatrixXd& Xs,
                                                     std::size_t n_samples, std::uint64_t seed) {
    const auto post = posterior(model, Xs);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::MatrixXd> out;
    const Eigen::Index q = Xs.rows();
    for (const auto& p : post) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.cov);
        const Eigen::MatrixXd A = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        Eigen::MatrixXd S(static_cast<Eigen::Index>(n_samples), q);
        Eigen::VectorXd z(q);
        for (std::size_t s = 0; s < n_samples; ++s) {
            for (Eigen::Index i = 0; i < q; ++i) z[i] = normal(rng);
            S.row(static_cast<Eigen::Index>(s)) = (p.mean + A * z).transpose();
        }
        out.push_back(std::move(S));
    }
    return out;
}

inline nlohmann::json to_json(const GpHyperparams& h) {
    return {{"lengthscales", h.lengthscales},
            {"signal_variance", h.signal_variance},
            {"noise_variance", h.noise_variance},
            {"mean_constant", h.mean_constant}};
}

inline nlohmann::json hyperparams_json(const SurrogateModel& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t j = 0; j < m.num_outputs(); ++j) {
        auto h = to_json(m.outputs[j].hyperparams());
        h["jitter"] = m.outputs[j].jitter();
        if (!m.diagnostics[j].restart_final_lml.empty()) h["lml"] = m.diagnostics[j].lml;
        arr.push_back(std::move(h));
    }
    return arr;
}

} // namespace hitl

#endif // HITL_GP_HPP
