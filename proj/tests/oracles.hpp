// Independent reference implementations used as test oracles. Nothing here
// calls into the library's algorithms; only plain types are shared.
#ifndef HITL_TESTS_ORACLES_HPP
#define HITL_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = std::vector<double>;

// O(n^2) non-dominated filter; duplicates keep their first occurrence.
inline std::vector<std::size_t> brute_front(const std::vector<Vec>& ys) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < ys.size() && ok; ++j) {
            if (i == j) continue;
            bool ge = true, gt = false;
            for (std::size_t k = 0; k < ys[i].size(); ++k) {
                ge = ge && ys[j][k] >= ys[i][k];
                gt = gt || ys[j][k] > ys[i][k];
            }
            if (ge && gt) ok = false;
            if (ys[j] == ys[i] && j < i) ok = false;
        }
        if (ok) keep.push_back(i);
    }
    return keep;
}

// Inclusion-exclusion over all nonempty subsets. Exponential; small n only.
inline double hv_inclusion_exclusion(const std::vector<Vec>& pts, const Vec& ref) {
    const std::size_t n = pts.size(), m = ref.size();
    double total = 0.0;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        Vec lo(m, std::numeric_limits<double>::infinity());
        int bits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask >> i & 1)) continue;
            ++bits;
            for (std::size_t k = 0; k < m; ++k) lo[k] = std::min(lo[k], pts[i][k]);
        }
        double v = 1.0;
        for (std::size_t k = 0; k < m; ++k) v *= std::max(0.0, lo[k] - ref[k]);
        total += (bits % 2 ? 1.0 : -1.0) * v;
    }
    return total;
}

inline double matern52(const Vec& a, const Vec& b, const Vec& ls, double sf2) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) r2 += (a[k] - b[k]) * (a[k] - b[k]) / (ls[k] * ls[k]);
    const double r = std::sqrt(r2);
    return sf2 * (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r2) * std::exp(-std::sqrt(5.0) * r);
}

struct DensePosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Textbook conditioning with an explicit inverse.
inline DensePosterior dense_posterior(const std::vector<Vec>& X, const Vec& y, const Vec& ls, double sf2, double noise,
                                      double mean_c, const std::vector<Vec>& Xs) {
    const auto n = static_cast<Eigen::Index>(X.size()), q = static_cast<Eigen::Index>(Xs.size());
    Eigen::MatrixXd K(n, n), Ks(n, q), Kss(q, q);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) K(i, j) = matern52(X[i], X[j], ls, sf2) + (i == j ? noise : 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < q; ++j) Ks(i, j) = matern52(X[i], Xs[j], ls, sf2);
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) Kss(i, j) = matern52(Xs[i], Xs[j], ls, sf2);
    const Eigen::MatrixXd Kinv = K.fullPivLu().inverse();
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = y[i] - mean_c;
    DensePosterior p;
    p.mean = (Ks.transpose() * Kinv * r).array() + mean_c;
    p.cov = Kss - Ks.transpose() * Kinv * Ks;
    return p;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// E[max(0, Y - best)] for Y ~ N(mu, sd^2).
inline double expected_improvement(double mu, double sd, double best) {
    if (sd <= 0.0) return std::max(0.0, mu - best);
    const double z = (mu - best) / sd;
    return (mu - best) * normal_cdf(z) + sd * normal_pdf(z);
}

// Fraction of a regular grid inside the box [lo, hi] that is not weakly
// dominated by any point, times the box volume.
inline double rasterized_nondominated_volume(const std::vector<Vec>& pts, const Vec& lo, const Vec& hi, int cells) {
    const std::size_t m = lo.size();
    std::vector<int> idx(m, 0);
    std::size_t free_cells = 0, total = 0;
    Vec z(m);
    for (;;) {
        for (std::size_t k = 0; k < m; ++k) z[k] = lo[k] + (idx[k] + 0.5) * (hi[k] - lo[k]) / cells;
        bool dom = false;
        for (const auto& p : pts) {
            bool all = true;
            for (std::size_t k = 0; k < m && all; ++k) all = p[k] >= z[k];
            if (all) {
                dom = true;
                break;
            }
        }
        free_cells += dom ? 0 : 1;
        ++total;
        std::size_t k = 0;
        while (k < m && ++idx[k] == cells) idx[k++] = 0;
        if (k == m) break;
    }
    double vol = 1.0;
    for (std::size_t k = 0; k < m; ++k) vol *= hi[k] - lo[k];
    return vol * static_cast<double>(free_cells) / static_cast<double>(total);
}

// Central differences of f at theta.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& theta, double h) {
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd a = theta, b = theta;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

inline std::vector<Vec> random_points(std::mt19937_64& rng, std::size_t n, std::size_t m, double lo = -1.0,
                                      double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vec> out(n, Vec(m));
    for (auto& p : out)
        for (auto& v : p) v = u(rng);
    return out;
}

// Points on the positive orthant of a sphere: mutually non-dominated.
inline std::vector<Vec> sphere_front(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n; ++i) {
        Vec p(m);
        double s = 0.0;
        for (auto& v : p) {
            v = std::abs(g(rng));
            s += v * v;
        }
        for (auto& v : p) v = v / std::sqrt(s) * 2.0 - 1.0;
        out.push_back(p);
    }
    return out;
}

} // namespace oracle

#endif // HITL_TESTS_ORACLES_HPP
