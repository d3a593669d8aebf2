#ifndef HITL_SIMUSER_HPP
#define HITL_SIMUSER_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "design_space.hpp"
#include "errors.hpp"
#include "objectives.hpp"
#include "seeding.hpp"

namespace hitl {

/// Seeded latent-utility rater. Each objective scores a design by a weighted
/// distance to a shared ideal; different weights make the objectives conflict.
struct SyntheticUser {
    DesignPoint ideal = DesignPoint::unit({});
    std::array<std::array<double, kNumParams>, kNumObjectives> weights{};
    std::array<double, kNumObjectives> sensitivity{};
    std::array<double, kNumObjectives> noise_sd{};
    std::uint64_t rng_seed = 0;
    /// Round items to the integer answer grid, as a questionnaire form would.
    bool likert_rounding = false;

    void validate() const {
        if (ideal.encoding != Encoding::unit) throw ConfigError("synthetic user ideal must be unit-encoded");
        hitl::validate(ideal);
        for (std::size_t o = 0; o < kNumObjectives; ++o) {
            double s = 0.0;
            for (double w : weights[o]) {
                if (w < 0.0) throw ConfigError("synthetic user weights must be nonnegative");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9) throw ConfigError("synthetic user weights must sum to 1 per objective");
            if (!(sensitivity[o] > 0.0)) throw ConfigError("synthetic user sensitivity must be positive");
            if (noise_sd[o] < 0.0) throw ConfigError("synthetic user noise must be nonnegative");
        }
    }
};

/// Latent utility in [-1, 1] for one objective; 1 at the ideal.
inline double latent_utility(const SyntheticUser& user, const DesignPoint& x, std::size_t objective) {
    const DesignPoint u = to_unit(x);
    double dist = 0.0;
    for (std::size_t k = 0; k < kNumParams; ++k)
        dist += user.weights[objective][k] * std::pow(std::abs(u.values[k] - user.ideal.values[k]), user.sensitivity[objective]);
    return 1.0 - 2.0 * dist;
}

namespace detail {

inline std::uint64_t hash_design(const DesignPoint& x) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (double v : x.values) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
    return h;
}

} // namespace detail

/// Rates a design. Noise draws depend on (seed, design, counter) only.
inline RatingVector rate(const SyntheticUser& user, const DesignPoint& x, std::uint64_t counter = 0) {
    const DesignPoint raw = from_unit(x);
    std::mt19937_64 rng(splitmix64(user.rng_seed ^ splitmix64(counter) ^ detail::hash_design(raw)));
    std::normal_distribution<double> normal(0.0, 1.0);
    RatingVector r;
    for (std::size_t o = 0; o < kNumObjectives; ++o) {
        const auto& s = kObjectives[o];
        const double t = (latent_utility(user, raw, o) + 1.0) / 2.0;
        const double span = s.item_upper - s.item_lower;
        const double value = s.raw_direction == Direction::maximize ? s.item_lower + t * span : s.item_upper - t * span;
        for (int i = 0; i < s.item_count; ++i) {
            double v = value;
            if (user.noise_sd[o] > 0.0) v += user.noise_sd[o] * normal(rng);
            if (user.likert_rounding) v = std::round(v);
            r.items[o].push_back(std::clamp(v, s.item_lower, s.item_upper));
        }
    }
    return r;
}

/// Calls `rate` with an incrementing counter. Not thread-safe per instance.
class SyntheticRater {
public:
    explicit SyntheticRater(SyntheticUser user) : user_(std::move(user)) {}
    RatingVector operator()(const DesignPoint& x) { return rate(user_, x, counter_++); }
    const SyntheticUser& user() const { return user_; }

private:
    SyntheticUser user_;
    std::uint64_t counter_ = 0;
};

enum class Archetype { minimalist, maximalist, mixed };

inline Archetype archetype_from_string(std::string_view s) {
    if (s == "minimalist") return Archetype::minimalist;
    if (s == "maximalist") return Archetype::maximalist;
    if (s == "mixed") return Archetype::mixed;
    throw ConfigError("unknown archetype '" + std::string(s) + "' (expected minimalist, maximalist or mixed)");
}

inline std::string_view to_string(Archetype a) {
    switch (a) {
    case Archetype::minimalist: return "minimalist";
    case Archetype::maximalist: return "maximalist";
    case Archetype::mixed: return "mixed";
    }
    return "?";
}

struct PopulationOptions {
    double noise_sd = 0.0;  // raw item units, applied to every objective
    double sensitivity_lo = 1.0;
    double sensitivity_hi = 2.0;
    bool likert_rounding = false;
};

inline std::vector<SyntheticUser> population(int n, Archetype archetype, std::uint64_t seed,
                                             const PopulationOptions& opt = {}) {
    if (n < 1) throw ConfigError("population size must be >= 1");
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    std::array<std::size_t, kNumElements> vis_idx{};
    for (std::size_t e = 0; e < kNumElements; ++e) vis_idx[e] = static_cast<std::size_t>(kElementLayout[e].visibility);

    std::vector<SyntheticUser> users;
    users.reserve(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
        SyntheticUser user;
        for (std::size_t k = 0; k < kNumParams; ++k) user.ideal.values[k] = unif(rng);
        if (archetype != Archetype::mixed) {
            // At most two elements break from the archetype.
            std::array<std::size_t, kNumElements> perm = vis_idx;
            std::shuffle(perm.begin(), perm.end(), rng);
            const auto exceptions = static_cast<std::size_t>(rng() % 3);
            for (std::size_t e = 0; e < kNumElements; ++e) {
                const bool on = (archetype == Archetype::maximalist) != (e < exceptions);
                user.ideal.values[perm[e]] = on ? 0.5 + 0.5 * unif(rng) : 0.499 * unif(rng);
            }
        }
        for (std::size_t o = 0; o < kNumObjectives; ++o) {
            double total = 0.0;
            for (auto& w : user.weights[o]) total += (w = expo(rng));
            for (auto& w : user.weights[o]) w /= total;
            user.sensitivity[o] = opt.sensitivity_lo + unif(rng) * (opt.sensitivity_hi - opt.sensitivity_lo);
            user.noise_sd[o] = opt.noise_sd;
        }
        user.rng_seed = rng();
        user.likert_rounding = opt.likert_rounding;
        users.push_back(std::move(user));
    }
    return users;
}

inline nlohmann::json to_json(const SyntheticUser& u) {
    return {{"ideal", u.ideal.values},
            {"weights", u.weights},
            {"sensitivity", u.sensitivity},
            {"noise_sd", u.noise_sd},
            {"rng_seed", u.rng_seed},
            {"likert_rounding", u.likert_rounding}};
}

inline SyntheticUser synthetic_user_from_json(const nlohmann::json& j) {
    SyntheticUser u;
    u.ideal = DesignPoint::unit(j.at("ideal").get<std::array<double, kNumParams>>());
    u.weights = j.at("weights").get<decltype(u.weights)>();
    u.sensitivity = j.at("sensitivity").get<decltype(u.sensitivity)>();
    u.noise_sd = j.at("noise_sd").get<decltype(u.noise_sd)>();
    u.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    u.likert_rounding = j.value("likert_rounding", false);
    u.validate();
    return u;
}

} // namespace hitl

#endif // HITL_SIMUSER_HPP
