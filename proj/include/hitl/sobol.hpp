#ifndef HITL_SOBOL_HPP
#define HITL_SOBOL_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <random>
#include <vector>

#include "errors.hpp"

namespace hitl {

/// Sobol low-discrepancy sequence (Joe-Kuo direction numbers) with optional
/// linear matrix scrambling plus a random digital shift.
class SobolSequence {
public:
    static constexpr int kMaxDim = 16;
    static constexpr int kBits = 32;

    explicit SobolSequence(int dim, bool scramble = false, std::uint64_t seed = 0) : dim_(dim) {
        if (dim < 1 || dim > kMaxDim) throw ConfigError("Sobol dimension must be in [1, 16]");
        direction_.assign(static_cast<std::size_t>(dim), std::array<std::uint32_t, kBits>{});
        init_directions();
        shift_.assign(static_cast<std::size_t>(dim), 0u);
        state_.assign(static_cast<std::size_t>(dim), 0u);
        if (scramble) apply_scramble(seed);
    }

    int dim() const { return dim_; }

    /// Next point in [0,1)^dim. The unscrambled sequence starts at the origin.
    std::vector<double> next() {
        std::vector<double> out(static_cast<std::size_t>(dim_));
        for (int d = 0; d < dim_; ++d)
            out[d] = static_cast<double>(state_[d] ^ shift_[d]) * 0x1p-32;
        const int c = std::countr_one(index_);
        for (int d = 0; d < dim_; ++d) state_[d] ^= direction_[d][c];
        ++index_;
        return out;
    }

    std::vector<std::vector<double>> draw(int n) {
        std::vector<std::vector<double>> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pts.push_back(next());
        return pts;
    }

private:
    struct Poly {
        int degree;
        std::uint32_t coeffs;
        std::array<std::uint32_t, 8> m;
    };

    // Primitive polynomials and initial direction numbers for dims 2..16.
    static constexpr std::array<Poly, kMaxDim - 1> kPolys{{
        {1, 0, {1}},
        {2, 1, {1, 3}},
        {3, 1, {1, 3, 1}},
        {3, 2, {1, 1, 1}},
        {4, 1, {1, 1, 3, 3}},
        {4, 4, {1, 3, 5, 13}},
        {5, 2, {1, 1, 5, 5, 17}},
        {5, 4, {1, 1, 5, 5, 5}},
        {5, 7, {1, 1, 7, 11, 19}},
        {5, 11, {1, 1, 5, 1, 1}},
        {5, 13, {1, 1, 1, 3, 11}},
        {5, 14, {1, 3, 5, 5, 31}},
        {6, 1, {1, 3, 3, 9, 7, 49}},
        {6, 13, {1, 1, 1, 15, 21, 21}},
        {6, 16, {1, 3, 1, 13, 27, 49}},
    }};

    void init_directions() {
        for (int k = 0; k < kBits; ++k) direction_[0][k] = 1u << (kBits - 1 - k);
        for (int d = 1; d < dim_; ++d) {
            const Poly& p = kPolys[d - 1];
            auto& v = direction_[d];
            const int s = p.degree;
            for (int k = 0; k < s && k < kBits; ++k) v[k] = p.m[k] << (kBits - 1 - k);
            for (int k = s; k < kBits; ++k) {
                std::uint32_t val = v[k - s] ^ (v[k - s] >> s);
                for (int j = 1; j < s; ++j)
                    if ((p.coeffs >> (s - 1 - j)) & 1u) val ^= v[k - j];
                v[k] = val;
            }
        }
    }

    // Left-multiplies each dimension's generator matrix by a random
    // lower-triangular matrix with unit diagonal, then draws a digital shift.
    void apply_scramble(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (int d = 0; d < dim_; ++d) {
            // Row r of the scrambling matrix, bit c set means entry (r, c); row r
            // acts on bit position r counted from the most significant bit.
            std::array<std::uint32_t, kBits> rows{};
            for (int r = 0; r < kBits; ++r) {
                std::uint32_t row = 1u << (kBits - 1 - r);
                for (int c = 0; c < r; ++c)
                    if (rng() & 1u) row |= 1u << (kBits - 1 - c);
                rows[r] = row;
            }
            for (int k = 0; k < kBits; ++k) {
                const std::uint32_t v = direction_[d][k];
                std::uint32_t out = 0;
                for (int r = 0; r < kBits; ++r)
                    if (std::popcount(rows[r] & v) & 1) out |= 1u << (kBits - 1 - r);
                direction_[d][k] = out;
            }
            shift_[d] = static_cast<std::uint32_t>(rng() >> 32);
        }
    }

    int dim_;
    std::uint32_t index_ = 0;
    std::vector<std::array<std::uint32_t, kBits>> direction_;
    std::vector<std::uint32_t> shift_;
    std::vector<std::uint32_t> state_;
};

} // namespace hitl

#endif // HITL_SOBOL_HPP
