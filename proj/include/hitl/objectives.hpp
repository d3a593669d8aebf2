#ifndef HITL_OBJECTIVES_HPP
#define HITL_OBJECTIVES_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace hitl {

inline constexpr std::size_t kNumObjectives = 6;
inline constexpr std::size_t kNumItems = 14;

enum class ObjectiveId { cognitive_load, predictability, trust, safety, acceptance, aesthetics };
enum class Direction { maximize, minimize };

struct ObjectiveSpec {
    ObjectiveId id;
    std::string_view name;
    int item_count;
    double item_lower;
    double item_upper;
    Direction raw_direction;

    constexpr double best() const { return raw_direction == Direction::maximize ? item_upper : item_lower; }
    constexpr double worst() const { return raw_direction == Direction::maximize ? item_lower : item_upper; }
};

/// Questionnaire scales in fixed order. This order is also the CSV item order.
inline constexpr std::array<ObjectiveSpec, kNumObjectives> kObjectives{{
    {ObjectiveId::cognitive_load, "cognitive_load", 1, 1.0, 20.0, Direction::minimize},
    {ObjectiveId::predictability, "predictability", 4, 1.0, 5.0, Direction::maximize},
    {ObjectiveId::trust, "trust", 2, 1.0, 5.0, Direction::maximize},
    {ObjectiveId::safety, "safety", 4, -3.0, 3.0, Direction::maximize},
    {ObjectiveId::acceptance, "acceptance", 2, 1.0, 7.0, Direction::maximize},
    {ObjectiveId::aesthetics, "aesthetics", 1, 1.0, 7.0, Direction::maximize},
}};

inline const ObjectiveSpec& spec(ObjectiveId id) { return kObjectives[static_cast<std::size_t>(id)]; }

/// Raw item values per objective, already oriented (inverse predictability
/// items reverse-scored before they get here).
struct RatingVector {
    std::array<std::vector<double>, kNumObjectives> items;

    std::vector<double>& operator[](ObjectiveId id) { return items[static_cast<std::size_t>(id)]; }
    const std::vector<double>& operator[](ObjectiveId id) const { return items[static_cast<std::size_t>(id)]; }
    bool operator==(const RatingVector&) const = default;

    /// Flat 14-item view in canonical order.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(kNumItems);
        for (const auto& v : items) out.insert(out.end(), v.begin(), v.end());
        return out;
    }

    static RatingVector from_flat(const std::vector<double>& flat) {
        if (flat.size() != kNumItems)
            throw ValidationError("", static_cast<int>(flat.size()),
                                  "expected " + std::to_string(kNumItems) + " rating items, got " +
                                      std::to_string(flat.size()));
        RatingVector r;
        std::size_t k = 0;
        for (std::size_t o = 0; o < kNumObjectives; ++o)
            for (int i = 0; i < kObjectives[o].item_count; ++i) r.items[o].push_back(flat[k++]);
        return r;
    }

    static RatingVector best() {
        RatingVector r;
        for (std::size_t o = 0; o < kNumObjectives; ++o)
            r.items[o].assign(kObjectives[o].item_count, kObjectives[o].best());
        return r;
    }

    static RatingVector worst() {
        RatingVector r;
        for (std::size_t o = 0; o < kNumObjectives; ++o)
            r.items[o].assign(kObjectives[o].item_count, kObjectives[o].worst());
        return r;
    }
};

using ObjectiveVector = std::array<double, kNumObjectives>;

/// Reverse-score an inverse-coded item: v -> lo + hi - v.
inline double reverse_item(double v, const ObjectiveSpec& s) { return s.item_lower + s.item_upper - v; }

inline void validate(const RatingVector& r, ObjectiveId id) {
    const auto& s = spec(id);
    const auto& items = r[id];
    const std::string name(s.name);
    if (static_cast<int>(items.size()) != s.item_count)
        throw ValidationError(name, -1,
                              name + ": expected " + std::to_string(s.item_count) + " items, got " +
                                  std::to_string(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!(items[i] >= s.item_lower && items[i] <= s.item_upper))
            throw ValidationError(name, static_cast<int>(i),
                                  name + " item " + std::to_string(i) + " = " + std::to_string(items[i]) +
                                      " outside [" + std::to_string(s.item_lower) + ", " +
                                      std::to_string(s.item_upper) + "]");
    }
}

inline void validate(const RatingVector& r) {
    for (const auto& s : kObjectives) validate(r, s.id);
}

/// Mean of the objective's items on the raw scale.
inline double aggregate(const RatingVector& r, ObjectiveId id) {
    validate(r, id);
    const auto& items = r[id];
    double sum = 0.0;
    for (double v : items) sum += v;
    return sum / static_cast<double>(items.size());
}

inline double normalize_value(double mean, const ObjectiveSpec& s) {
    const double t = (mean - s.item_lower) / (s.item_upper - s.item_lower);
    return s.raw_direction == Direction::maximize ? 2.0 * t - 1.0 : 1.0 - 2.0 * t;
}

/// Maps ratings to [-1,1]^6 with larger always better.
inline ObjectiveVector normalize(const RatingVector& r) {
    ObjectiveVector y{};
    for (std::size_t o = 0; o < kNumObjectives; ++o) y[o] = normalize_value(aggregate(r, kObjectives[o].id), kObjectives[o]);
    return y;
}

inline bool is_perfect(const RatingVector& r) {
    validate(r);
    for (std::size_t o = 0; o < kNumObjectives; ++o)
        for (double v : r.items[o])
            if (v != kObjectives[o].best()) return false;
    return true;
}

inline nlohmann::json objective_schema_json() {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& s : kObjectives) {
        objs.push_back({{"id", s.name},
                        {"item_count", s.item_count},
                        {"item_lower", s.item_lower},
                        {"item_upper", s.item_upper},
                        {"direction", s.raw_direction == Direction::maximize ? "maximize" : "minimize"}});
    }
    return {{"objectives", objs}, {"item_order", "cognitive_load,predictability x4,trust x2,safety x4,acceptance x2,aesthetics"}};
}

} // namespace hitl

#endif // HITL_OBJECTIVES_HPP
