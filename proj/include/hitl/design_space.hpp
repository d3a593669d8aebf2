#ifndef HITL_DESIGN_SPACE_HPP
#define HITL_DESIGN_SPACE_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "errors.hpp"

namespace hitl {

inline constexpr std::size_t kNumParams = 16;
inline constexpr double kVisibilityThreshold = 0.5;

enum class ParamKind { visibility, alpha, size };

inline std::string_view to_string(ParamKind k) {
    switch (k) {
    case ParamKind::visibility: return "visibility";
    case ParamKind::alpha: return "alpha";
    case ParamKind::size: return "size";
    }
    return "?";
}

struct ParameterSpec {
    std::string_view id;
    std::string_view name;
    ParamKind kind;
    double lower;
    double upper;

    constexpr bool bool_mapped() const { return kind == ParamKind::visibility; }
    constexpr double span() const { return upper - lower; }
};

struct DesignSpace {
    std::array<ParameterSpec, kNumParams> params;

    static constexpr std::size_t dimension() { return kNumParams; }
};

/// The visualization parameter catalog. Ranges are in scene units.
inline const DesignSpace& catalog() {
    using enum ParamKind;
    static const DesignSpace space{{{
        {"p1", "Semantic Segmentation", visibility, 0.0, 1.0},
        {"p2", "Semantic Segmentation Alpha", alpha, 0.1, 1.0},
        {"p3", "Pedestrian Intention", visibility, 0.0, 1.0},
        {"p4", "Pedestrian Intention Size", size, 0.1, 0.2},
        {"p5", "Trajectory", visibility, 0.0, 1.0},
        {"p6", "Trajectory Alpha", alpha, 0.1, 1.0},
        {"p7", "Trajectory Size", size, 0.1, 0.6},
        {"p8", "Ego Trajectory", visibility, 0.0, 1.0},
        {"p9", "Ego Trajectory Alpha", alpha, 0.1, 1.0},
        {"p10", "Ego Trajectory Size", size, 0.1, 0.6},
        {"p11", "CAD-Covered Area", visibility, 0.0, 1.0},
        {"p12", "CAD-Covered Area Alpha", alpha, 0.1, 1.0},
        {"p13", "CAD-Covered Area Size", size, 0.2, 0.8},
        {"p14", "Occluded Cars", visibility, 0.0, 1.0},
        {"p15", "Vehicle Status HUD", visibility, 0.0, 1.0},
        {"p16", "Vehicle Status HUD Alpha", alpha, 0.1, 1.0},
    }}};
    return space;
}

enum class Encoding { raw, unit };

/// A concrete design. `raw` coordinates are in catalog units, `unit` ones
/// are rescaled per parameter onto [0,1].
struct DesignPoint {
    Encoding encoding = Encoding::raw;
    std::array<double, kNumParams> values{};

    static DesignPoint raw(const std::array<double, kNumParams>& v) { return {Encoding::raw, v}; }
    static DesignPoint unit(const std::array<double, kNumParams>& v) { return {Encoding::unit, v}; }

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool operator==(const DesignPoint&) const = default;
};

/// Throws BoundsError naming the first offending parameter. Bounds are inclusive.
inline void validate(const DesignPoint& x) {
    const auto& space = catalog();
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& p = space.params[i];
        const double lo = x.encoding == Encoding::raw ? p.lower : 0.0;
        const double hi = x.encoding == Encoding::raw ? p.upper : 1.0;
        const double v = x.values[i];
        if (!(v >= lo && v <= hi)) {
            throw BoundsError(std::string(p.id),
                              "parameter " + std::string(p.id) + " value " + std::to_string(v) +
                                  " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    }
}

inline DesignPoint to_unit(const DesignPoint& x) {
    if (x.encoding == Encoding::unit) {
        validate(x);
        return x;
    }
    validate(x);
    DesignPoint u{Encoding::unit, {}};
    const auto& space = catalog();
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& p = space.params[i];
        u.values[i] = (x.values[i] - p.lower) / p.span();
    }
    return u;
}

inline DesignPoint from_unit(const DesignPoint& u) {
    if (u.encoding == Encoding::raw) {
        validate(u);
        return u;
    }
    validate(u);
    DesignPoint x{Encoding::raw, {}};
    const auto& space = catalog();
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& p = space.params[i];
        // Pin the endpoints so that lower/upper survive the round trip exactly.
        const double t = u.values[i];
        x.values[i] = t == 1.0 ? p.upper : p.lower + t * p.span();
    }
    return x;
}

// -- Rendering -------------------------------------------------------------

enum class Element {
    semantic_segmentation,
    pedestrian_intention,
    trajectory,
    ego_trajectory,
    cad_covered_area,
    occluded_cars,
    vehicle_status_hud,
};
inline constexpr std::size_t kNumElements = 7;

struct ElementLayout {
    Element element;
    std::string_view name;
    int visibility;  // parameter index
    int alpha;       // -1 when the element has no alpha
    int size;        // -1 when the element has no size
};

inline constexpr std::array<ElementLayout, kNumElements> kElementLayout{{
    {Element::semantic_segmentation, "semantic_segmentation", 0, 1, -1},
    {Element::pedestrian_intention, "pedestrian_intention", 2, -1, 3},
    {Element::trajectory, "trajectory", 4, 5, 6},
    {Element::ego_trajectory, "ego_trajectory", 7, 8, 9},
    {Element::cad_covered_area, "cad_covered_area", 10, 11, 12},
    {Element::occluded_cars, "occluded_cars", 13, -1, -1},
    {Element::vehicle_status_hud, "vehicle_status_hud", 14, 15, -1},
}};

struct ElementState {
    bool visible = false;
    std::optional<double> alpha;
    std::optional<double> size;
    bool operator==(const ElementState&) const = default;
};

/// Per-element appearance. Hidden elements keep their alpha/size.
struct RenderedDesign {
    std::array<ElementState, kNumElements> elements{};

    const ElementState& operator[](Element e) const { return elements[static_cast<std::size_t>(e)]; }
    bool operator==(const RenderedDesign&) const = default;
};

inline RenderedDesign render(const DesignPoint& design) {
    const DesignPoint x = from_unit(design);
    RenderedDesign out;
    for (std::size_t e = 0; e < kNumElements; ++e) {
        const auto& lay = kElementLayout[e];
        auto& st = out.elements[e];
        st.visible = x.values[lay.visibility] >= kVisibilityThreshold;
        if (lay.alpha >= 0) st.alpha = x.values[lay.alpha];
        if (lay.size >= 0) st.size = x.values[lay.size];
    }
    return out;
}

/// All parameters at their lower bound: every element hidden.
inline DesignPoint all_off_design() {
    DesignPoint x{Encoding::raw, {}};
    for (std::size_t i = 0; i < kNumParams; ++i) x.values[i] = catalog().params[i].lower;
    return x;
}

/// Mean of the eight expert designs, unit-encoded.
inline constexpr std::array<double, kNumParams> kExpertMeanUnit{
    0.69, 0.23, 0.69, 0.15, 0.69, 0.61, 0.46, 0.56,
    0.71, 0.34, 0.56, 0.45, 0.33, 0.63, 0.75, 0.31};

inline DesignPoint expert_preset() { return from_unit(DesignPoint::unit(kExpertMeanUnit)); }

// -- JSON --------------------------------------------------------------------

inline nlohmann::json catalog_json() {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : catalog().params) {
        params.push_back({{"id", p.id},
                          {"name", p.name},
                          {"kind", to_string(p.kind)},
                          {"lower", p.lower},
                          {"upper", p.upper},
                          {"bool_mapped", p.bool_mapped()}});
    }
    return {{"dimension", kNumParams}, {"visibility_threshold", kVisibilityThreshold}, {"params", params}};
}

inline nlohmann::json to_json(const RenderedDesign& r) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t e = 0; e < kNumElements; ++e) {
        const auto& st = r.elements[e];
        nlohmann::json el{{"visible", st.visible}};
        el["alpha"] = st.alpha ? nlohmann::json(*st.alpha) : nlohmann::json(nullptr);
        el["size"] = st.size ? nlohmann::json(*st.size) : nlohmann::json(nullptr);
        j[std::string(kElementLayout[e].name)] = std::move(el);
    }
    return j;
}

inline nlohmann::json to_json(const DesignPoint& x) { return nlohmann::json(x.values); }

/// Parses a JSON array of 16 numbers into a design of the given encoding.
inline DesignPoint design_from_json(const nlohmann::json& j, Encoding enc) {
    if (!j.is_array() || j.size() != kNumParams)
        throw ConfigError("design must be an array of " + std::to_string(kNumParams) + " numbers");
    DesignPoint x{enc, {}};
    for (std::size_t i = 0; i < kNumParams; ++i) {
        if (!j[i].is_number()) throw ConfigError("design entry " + std::to_string(i) + " is not a number");
        x.values[i] = j[i].get<double>();
    }
    validate(x);
    return x;
}

} // namespace hitl

#endif // HITL_DESIGN_SPACE_HPP
