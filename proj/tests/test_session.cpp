#include <random>

#include <gtest/gtest.h>

#include "hitl/session.hpp"
#include "hitl/simuser.hpp"
#include "oracles.hpp"

using namespace hitl;

namespace {

constexpr double kExpertMeans[16] = {0.69, 0.23, 0.69, 0.15, 0.69, 0.61, 0.46, 0.56,
                                     0.71, 0.34, 0.56, 0.45, 0.33, 0.63, 0.75, 0.31};

SessionOptions stub_options(std::vector<nlohmann::json>* log = nullptr) {
    SessionOptions opt;
    opt.proposer = sobol_proposer();
    opt.clock = logical_clock();
    if (log) opt.sink = [log](const nlohmann::json& e) { log->push_back(e); };
    return opt;
}

RatingVector mediocre() { return RatingVector::from_flat({8, 3, 3, 3, 3, 4, 4, 0, 0, 0, 0, 5, 5, 5}); }

DesignPoint preset_unit() {
    std::array<double, kNumParams> u{};
    std::copy(std::begin(kExpertMeans), std::end(kExpertMeans), u.begin());
    return DesignPoint::unit(u);
}

int run_to_end(Session& s) {
    int n = 0;
    for (;;) {
        ++n;
        if (s.submit_rating(mediocre()).kind != SubmitResult::Kind::next) return n;
    }
}

} // namespace

TEST(Session, ColdStartBudgetIsFifteen) {
    auto [s, first] = Session::start(make_condition(ConditionId::C4_cold_start), 1, stub_options());
    EXPECT_EQ(s.current_design_phase(), Phase::sampling);
    EXPECT_EQ(run_to_end(s), 15);
    EXPECT_EQ(s.phase(), SessionPhase::finished);
    ASSERT_EQ(s.history().size(), 15u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(s.history()[i].phase, Phase::sampling);
    for (int i = 5; i < 15; ++i) EXPECT_EQ(s.history()[i].phase, Phase::optimization);
    EXPECT_THROW(s.submit_rating(mediocre()), StateError);
}

TEST(Session, WarmStartBudgetIsEleven) {
    auto [s5, d5] = Session::start(make_condition(ConditionId::C5_expert_warm), 2, stub_options());
    EXPECT_EQ(run_to_end(s5), 11);
    auto [s6, d6] = Session::start(make_condition(ConditionId::C6_user_warm, preset_unit()), 3, stub_options());
    EXPECT_EQ(run_to_end(s6), 11);
    EXPECT_EQ(s6.history()[0].phase, Phase::warmstart_seed);
}

TEST(Session, StaticConditionsTakeOneRating) {
    for (auto id : {ConditionId::C1_no_vis, ConditionId::C2_expert_static}) {
        auto [s, d] = Session::start(make_condition(id), 4, stub_options());
        EXPECT_EQ(run_to_end(s), 1);
    }
    auto [s3, d3] = Session::start(make_condition(ConditionId::C3_custom_static, preset_unit()), 4, stub_options());
    EXPECT_EQ(run_to_end(s3), 1);
    EXPECT_THROW(Session::start(make_condition(ConditionId::C3_custom_static), 4, stub_options()), ConfigError);
    EXPECT_THROW(Session::start(make_condition(ConditionId::C6_user_warm), 4, stub_options()), ConfigError);
}

TEST(Session, TwoPerfectRatingsStop) {
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 5, stub_options());
    s.submit_rating(mediocre());
    EXPECT_EQ(s.submit_rating(RatingVector::best()).kind, SubmitResult::Kind::next);
    EXPECT_EQ(s.consecutive_perfect(), 1);
    const auto res = s.submit_rating(RatingVector::best());
    EXPECT_EQ(res.kind, SubmitResult::Kind::stopped);
    EXPECT_EQ(s.phase(), SessionPhase::stopped);
    ASSERT_TRUE(res.front);
    EXPECT_EQ(s.history().size(), 3u);
    EXPECT_THROW(s.submit_rating(mediocre()), StateError);
}

TEST(Session, PerfectCounterResets) {
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 6, stub_options());
    s.submit_rating(RatingVector::best());
    s.submit_rating(mediocre());
    EXPECT_EQ(s.consecutive_perfect(), 0);
    EXPECT_EQ(s.submit_rating(RatingVector::best()).kind, SubmitResult::Kind::next);
    EXPECT_EQ(s.submit_rating(RatingVector::best()).kind, SubmitResult::Kind::stopped);
}

TEST(Session, PerfectRatingOnStaticDesignStillFinishes) {
    auto [s, d] = Session::start(make_condition(ConditionId::C2_expert_static), 7, stub_options());
    EXPECT_EQ(s.submit_rating(RatingVector::best()).kind, SubmitResult::Kind::finished);
}

TEST(Session, ExpertWarmStartShowsPreset) {
    auto [s, first] = Session::start(make_condition(ConditionId::C5_expert_warm), 8, stub_options());
    const DesignPoint u = to_unit(first);
    for (std::size_t k = 0; k < kNumParams; ++k) EXPECT_NEAR(u.values[k], kExpertMeans[k], 1e-2) << k;
    EXPECT_EQ(s.current_design_phase(), Phase::warmstart_seed);
}

TEST(Session, NoVisualizationRendersNothing) {
    auto [s, first] = Session::start(make_condition(ConditionId::C1_no_vis), 9, stub_options());
    for (const auto& e : render(first).elements) EXPECT_FALSE(e.visible);
}

TEST(Session, SamplingDesignsAreReproducible) {
    auto run = [](std::uint64_t seed) {
        auto [s, first] = Session::start(make_condition(ConditionId::C4_cold_start), seed, stub_options());
        std::vector<DesignPoint> shown{first};
        for (int i = 0; i < 4; ++i) shown.push_back(*s.submit_rating(mediocre()).next);
        return shown;
    };
    EXPECT_EQ(run(10), run(10));
    EXPECT_NE(run(10), run(11));
}

TEST(Session, ReplayReproducesState) {
    std::vector<nlohmann::json> log;
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 12, stub_options(&log));
    std::mt19937_64 rng(13);
    for (int i = 0; i < 9; ++i) {
        auto r = mediocre();
        r[ObjectiveId::trust][0] = 1.0 + static_cast<double>(rng() % 5);
        s.submit_rating(r);
    }
    SessionOptions opt;
    opt.proposer = sobol_proposer();
    const Session back = Session::replay(log, opt);
    EXPECT_EQ(back.snapshot(), s.snapshot());
    EXPECT_EQ(back.current_design(), s.current_design());
}

TEST(Session, ReplayWithEngineProposer) {
    EngineConfig cfg;
    cfg.gp.restarts = 2;
    cfg.gp.max_iterations = 50;
    cfg.acquisition.restart_candidates = 64;
    cfg.acquisition.top_restarts = 2;
    cfg.acquisition.mc_samples = 128;
    std::vector<nlohmann::json> log;
    SessionOptions opt;
    opt.config = cfg;
    opt.clock = logical_clock();
    opt.sink = [&log](const nlohmann::json& e) { log.push_back(e); };
    const SyntheticUser user = population(1, Archetype::mixed, 14)[0];
    auto [s, d] = Session::start(make_condition(ConditionId::C5_expert_warm), 15, opt);
    DesignPoint shown = d;
    for (int i = 0; i < 3; ++i) shown = *s.submit_rating(rate(user, shown, static_cast<std::uint64_t>(i))).next;
    const Session back = Session::replay(log);
    EXPECT_EQ(back.snapshot(), s.snapshot());
}

TEST(Session, ReplayDetectsDivergence) {
    std::vector<nlohmann::json> log;
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 16, stub_options(&log));
    s.submit_rating(mediocre());
    for (auto& e : log)
        if (e["event"] == "design" && e["iteration"] == 1) e["design_raw"][0] = 0.0;
    SessionOptions opt;
    opt.proposer = sobol_proposer();
    EXPECT_THROW(Session::replay(log, opt), Error);
}

TEST(Session, ProposerFailureFallsBack) {
    std::vector<nlohmann::json> log;
    SessionOptions opt = stub_options(&log);
    opt.proposer = [](const std::vector<Observation>&, std::uint64_t) -> ProposalRecord {
        throw FitError("boom");
    };
    auto [s, d] = Session::start(make_condition(ConditionId::C5_expert_warm), 17, opt);
    const auto res = s.submit_rating(mediocre());
    ASSERT_TRUE(res.next);
    EXPECT_NO_THROW(validate(*res.next));
    bool seen = false;
    for (const auto& e : log) seen = seen || e["event"] == "proposal_error";
    EXPECT_TRUE(seen);
    EXPECT_EQ(run_to_end(s), 10);
}

TEST(Session, InvalidRatingLeavesStateUntouched) {
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 18, stub_options());
    auto r = mediocre();
    r[ObjectiveId::safety][1] = 9.0;
    EXPECT_THROW(s.submit_rating(r), ValidationError);
    EXPECT_EQ(s.iteration(), 0);
    EXPECT_EQ(s.phase(), SessionPhase::awaiting_rating);
}

TEST(Session, FrontOnlyAfterEnd) {
    auto [s, d] = Session::start(make_condition(ConditionId::C4_cold_start), 19, stub_options());
    EXPECT_THROW(s.extract_front(), StateError);
    run_to_end(s);
    EXPECT_GE(s.extract_front().size(), 1u);
}

TEST(ExtractFront, HandCases) {
    Observation a{DesignPoint::unit({}), {}, 0, Phase::sampling};
    a.y.fill(0.1);
    EXPECT_EQ(extract_front({a}).front.member_indices, (std::vector<std::size_t>{0}));
    Observation b = a;
    b.y.fill(0.5);
    b.iteration = 1;
    Observation c = a;
    c.y.fill(0.9);
    c.iteration = 2;
    const auto f = extract_front({a, b, c});
    EXPECT_EQ(f.front.member_indices, (std::vector<std::size_t>{2}));
    EXPECT_EQ(f.iterations, (std::vector<int>{2}));
    EXPECT_THROW(extract_front({}), StateError);
}

TEST(ExtractFront, MatchesBruteForce) {
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<Observation> hist;
        std::vector<oracle::Vec> ys;
        for (int i = 0; i < 15; ++i) {
            Observation o{DesignPoint::unit({}), {}, i, Phase::optimization};
            for (auto& v : o.y) v = u(rng);
            ys.emplace_back(o.y.begin(), o.y.end());
            hist.push_back(o);
        }
        const auto f = extract_front(hist);
        EXPECT_EQ(f.front.member_indices, oracle::brute_front(ys));
        double best = -1e9;
        for (std::size_t i = 0; i < f.size(); ++i) {
            double sum = 0.0;
            for (double v : f.front.points[i]) sum += v;
            best = std::max(best, sum);
        }
        double chosen = 0.0;
        for (double v : f.front.points[f.best]) chosen += v;
        EXPECT_EQ(chosen, best);
    }
}

TEST(Conditions, NamesAndJson) {
    EXPECT_EQ(condition_from_string("C4"), ConditionId::C4_cold_start);
    EXPECT_THROW(condition_from_string("C9"), ConfigError);
    const auto c = make_condition(ConditionId::C6_user_warm, preset_unit());
    const auto back = condition_from_json(to_json(c));
    EXPECT_EQ(back.budget(), 11);
    EXPECT_EQ(back.seed_design, c.seed_design);
    EXPECT_EQ(make_condition(ConditionId::C4_cold_start).budget(), 15);
    EXPECT_EQ(make_condition(ConditionId::C1_no_vis).budget(), 1);
}

TEST(Conditions, EngineConfigJson) {
    EngineConfig c;
    c.acquisition.mc_samples = 64;
    c.gp.restarts = 3;
    c.stopping.consecutive_required = 4;
    const auto back = engine_config_from_json(to_json(c));
    EXPECT_EQ(back.acquisition.mc_samples, 64u);
    EXPECT_EQ(back.gp.restarts, 3);
    EXPECT_EQ(back.stopping.consecutive_required, 4);
    EXPECT_THROW(engine_config_from_json({{"stopping", {{"consecutive_required", 0}}}}), ConfigError);
}
