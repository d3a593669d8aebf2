#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "hitl/design_space.hpp"

using namespace hitl;

namespace {

std::vector<std::vector<std::string>> read_golden(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        rows.push_back(f);
    }
    return rows;
}

DesignPoint with(DesignPoint x, std::size_t i, double v) {
    x.values[i] = v;
    return x;
}

} // namespace

TEST(DesignSpace, CatalogMatchesGolden) {
    const auto rows = read_golden(HITL_GOLDEN_DIR "/catalog.csv");
    ASSERT_EQ(rows.size(), kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& p = catalog().params[i];
        EXPECT_EQ(p.id, rows[i][0]);
        EXPECT_EQ(p.name, rows[i][1]);
        EXPECT_EQ(to_string(p.kind), rows[i][2]);
        EXPECT_EQ(p.lower, std::stod(rows[i][3]));
        EXPECT_EQ(p.upper, std::stod(rows[i][4]));
        EXPECT_EQ(p.bool_mapped(), p.kind == ParamKind::visibility);
    }
}

TEST(DesignSpace, CatalogJsonExport) {
    const auto j = catalog_json();
    EXPECT_EQ(j["dimension"], 16);
    EXPECT_EQ(j["visibility_threshold"], 0.5);
    ASSERT_EQ(j["params"].size(), 16u);
    EXPECT_EQ(j["params"][12]["id"], "p13");
    EXPECT_EQ(j["params"][12]["lower"], 0.2);
    EXPECT_EQ(j["params"][12]["upper"], 0.8);
}

TEST(DesignSpace, VisibilityThresholdBoundary) {
    const DesignPoint base = expert_preset();
    for (const auto& lay : kElementLayout) {
        const auto i = static_cast<std::size_t>(lay.visibility);
        EXPECT_FALSE(render(with(base, i, 0.5 - 1e-9))[lay.element].visible) << lay.name;
        EXPECT_TRUE(render(with(base, i, 0.5))[lay.element].visible) << lay.name;
        EXPECT_TRUE(render(with(base, i, 0.5 + 1e-9))[lay.element].visible) << lay.name;
    }
}

TEST(DesignSpace, AllOffDesignHidesEverything) {
    const auto r = render(all_off_design());
    for (const auto& e : r.elements) EXPECT_FALSE(e.visible);
    EXPECT_EQ(r[Element::semantic_segmentation].alpha, 0.1);
    EXPECT_FALSE(r[Element::occluded_cars].alpha.has_value());
    EXPECT_FALSE(r[Element::occluded_cars].size.has_value());
}

TEST(DesignSpace, HiddenElementKeepsAlphaAndSize) {
    DesignPoint x = all_off_design();
    x.values[5] = 0.8;  // p6
    x.values[6] = 0.5;  // p7
    const auto st = render(x)[Element::trajectory];
    EXPECT_FALSE(st.visible);
    EXPECT_DOUBLE_EQ(*st.alpha, 0.8);
    EXPECT_DOUBLE_EQ(*st.size, 0.5);
}

TEST(DesignSpace, RoundTripExample) {
    DesignPoint u = DesignPoint::unit({});
    u.values.fill(0.5);
    const DesignPoint x = from_unit(u);
    EXPECT_DOUBLE_EQ(x.values[1], 0.55);   // p2 alpha
    EXPECT_DOUBLE_EQ(x.values[3], 0.15);   // p4
    EXPECT_DOUBLE_EQ(x.values[12], 0.5);   // p13
    const DesignPoint back = to_unit(x);
    for (double v : back.values) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(DesignSpace, EndpointsMapExactly) {
    DesignPoint lo = DesignPoint::unit({}), hi = DesignPoint::unit({});
    hi.values.fill(1.0);
    const DesignPoint a = from_unit(lo), b = from_unit(hi);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        EXPECT_EQ(a.values[i], catalog().params[i].lower);
        EXPECT_EQ(b.values[i], catalog().params[i].upper);
    }
}

TEST(DesignSpace, UnitRoundTripProperty) {
    std::mt19937_64 rng(20240601);
    for (int t = 0; t < 10000; ++t) {
        DesignPoint x{Encoding::raw, {}};
        for (std::size_t i = 0; i < kNumParams; ++i) {
            const auto& p = catalog().params[i];
            x.values[i] = std::uniform_real_distribution<double>(p.lower, p.upper)(rng);
        }
        const DesignPoint u = to_unit(x);
        for (double v : u.values) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
        const DesignPoint back = from_unit(u);
        for (std::size_t i = 0; i < kNumParams; ++i) ASSERT_NEAR(back.values[i], x.values[i], 1e-12);
    }
}

TEST(DesignSpace, OutOfBoundsNamesParameter) {
    DesignPoint x = expert_preset();
    x.values[3] = 0.25;  // p4 upper bound is 0.2
    try {
        to_unit(x);
        FAIL() << "expected BoundsError";
    } catch (const BoundsError& e) {
        EXPECT_EQ(e.param_id(), "p4");
    }
    DesignPoint u = DesignPoint::unit({});
    u.values[15] = 1.5;
    EXPECT_THROW(from_unit(u), BoundsError);
    u.values[15] = std::nan("");
    EXPECT_THROW(validate(u), BoundsError);
}

TEST(DesignSpace, ExpertPresetUnitValues) {
    const DesignPoint u = to_unit(expert_preset());
    const double expected[16] = {0.69, 0.23, 0.69, 0.15, 0.69, 0.61, 0.46, 0.56,
                                 0.71, 0.34, 0.56, 0.45, 0.33, 0.63, 0.75, 0.31};
    for (std::size_t i = 0; i < kNumParams; ++i) EXPECT_NEAR(u.values[i], expected[i], 1e-12);
}

TEST(DesignSpace, DesignFromJsonRejectsBadInput) {
    EXPECT_THROW(design_from_json(nlohmann::json::array({1, 2}), Encoding::raw), ConfigError);
    nlohmann::json j = to_json(expert_preset());
    j[3] = "x";
    EXPECT_THROW(design_from_json(j, Encoding::raw), ConfigError);
    j[3] = 9.0;
    EXPECT_THROW(design_from_json(j, Encoding::raw), BoundsError);
    EXPECT_EQ(design_from_json(to_json(expert_preset()), Encoding::raw), expert_preset());
}
