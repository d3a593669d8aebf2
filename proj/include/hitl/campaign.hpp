#ifndef HITL_CAMPAIGN_HPP
#define HITL_CAMPAIGN_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "design_space.hpp"
#include "gp.hpp"
#include "objectives.hpp"
#include "pareto.hpp"
#include "protocol.hpp"
#include "seeding.hpp"
#include "session.hpp"
#include "simuser.hpp"

namespace hitl {

/// Hypervolume settings shared by every summary so values are comparable:
/// fixed sampling box [ref, 1]^6 and a fixed seed (common random numbers).
inline HypervolumeConfig summary_hv_config(const Point& reference_point = Point(kNumObjectives, -1.1)) {
    HypervolumeConfig cfg;
    cfg.reference_point = reference_point;
    cfg.upper_bound.assign(kNumObjectives, 1.0);
    cfg.mc_samples = std::size_t{1} << 17;
    cfg.seed = 0x4859504552ULL;
    return cfg;
}

inline double history_hypervolume(const std::vector<Observation>& history, const HypervolumeConfig& cfg) {
    const auto front = pareto_front(observed_points(history));
    return hypervolume(front, cfg).value;
}

inline double best_sum(const std::vector<Observation>& history) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& o : history) best = std::max(best, std::accumulate(o.y.begin(), o.y.end(), 0.0));
    return best;
}

/// A user's own design for C3/C6: their ideal with Gaussian jitter in unit space.
inline DesignPoint custom_design_for(const SyntheticUser& user, double jitter_sd, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0xC057ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    DesignPoint u = user.ideal;
    for (auto& v : u.values) v = std::clamp(v + jitter_sd * normal(rng), 0.0, 1.0);
    return from_unit(u);
}

struct SessionOutcome {
    std::string session_id;
    std::vector<Observation> history;
    SessionPhase end_phase = SessionPhase::finished;
    DesignFront front;
    std::vector<nlohmann::json> events;
};

/// Drives one session to completion against a synthetic user.
inline SessionOutcome run_session(const CampaignCondition& condition, const SyntheticUser& user, std::uint64_t seed,
                                  const EngineConfig& config, Proposer proposer = {}, std::string id = {}) {
    SessionOutcome out;
    SessionOptions opt{config, std::move(proposer), logical_clock(),
                       [&out](const nlohmann::json& e) { out.events.push_back(e); }, std::move(id)};
    auto [session, design] = Session::start(condition, seed, std::move(opt));
    SyntheticRater rater(user);
    for (;;) {
        const auto res = session.submit_rating(rater(design));
        if (!res.next) break;
        design = *res.next;
    }
    out.session_id = session.id();
    out.history = session.history();
    out.end_phase = session.phase();
    out.front = session.extract_front();
    return out;
}

/// Uniform random designs with the same evaluation budget.
inline std::vector<Observation> random_search(const SyntheticUser& user, int budget, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0xBA5EULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SyntheticRater rater(user);
    std::vector<Observation> hist;
    for (int i = 0; i < budget; ++i) {
        DesignPoint u = DesignPoint::unit({});
        for (auto& v : u.values) v = unif(rng);
        hist.push_back({u, normalize(rater(u)), i, Phase::sampling});
    }
    return hist;
}

struct SimulationOptions {
    ConditionId condition = ConditionId::C4_cold_start;
    int users = 20;
    std::uint64_t seed = 1;
    Archetype archetype = Archetype::mixed;
    PopulationOptions population{};
    double custom_jitter_sd = 0.1;   // C3/C6 seed design spread around the ideal
    EngineConfig config{};
    Point reference_point = Point(kNumObjectives, -1.1);
    int workers = 1;
    Proposer proposer{};             // empty -> GP + EHVI
};

struct SimulationRow {
    int user = 0;
    std::string session_id;
    int observations = 0;
    bool stopped_early = false;
    double final_hypervolume = 0.0;
    double best_sum = 0.0;
    double baseline_hypervolume = 0.0;
    double baseline_best_sum = 0.0;
    std::vector<double> hypervolume_series;  // after each observation
};

struct SimulationReport {
    std::vector<SimulationRow> rows;
    std::vector<SessionOutcome> sessions;
    std::vector<SyntheticUser> users;
};

inline std::vector<double> hypervolume_series(const std::vector<Observation>& history, const HypervolumeConfig& cfg) {
    std::vector<double> series;
    for (std::size_t k = 1; k <= history.size(); ++k)
        series.push_back(history_hypervolume({history.begin(), history.begin() + static_cast<std::ptrdiff_t>(k)}, cfg));
    return series;
}

/// Runs one session per synthetic user plus the random-search baseline.
/// Results are ordered by user index regardless of worker count.
inline SimulationReport simulate(const SimulationOptions& opt) {
    SimulationReport rep;
    rep.users = population(opt.users, opt.archetype, opt.seed, opt.population);
    rep.rows.resize(rep.users.size());
    rep.sessions.resize(rep.users.size());
    const HypervolumeConfig hv = summary_hv_config(opt.reference_point);

    auto run_one = [&](std::size_t u) {
        const auto& user = rep.users[u];
        const std::uint64_t session_seed = derive_seed(opt.seed, 1000 + u);
        std::optional<DesignPoint> seed_design;
        if (opt.condition == ConditionId::C3_custom_static || opt.condition == ConditionId::C6_user_warm)
            seed_design = custom_design_for(user, opt.custom_jitter_sd, session_seed);
        const CampaignCondition cond = make_condition(opt.condition, seed_design);
        std::ostringstream id;
        id << to_string(opt.condition).substr(0, 2) << "-u" << u;
        auto outcome = run_session(cond, user, session_seed, opt.config, opt.proposer, id.str());

        SimulationRow row;
        row.user = static_cast<int>(u);
        row.session_id = outcome.session_id;
        row.observations = static_cast<int>(outcome.history.size());
        row.stopped_early = outcome.end_phase == SessionPhase::stopped;
        row.hypervolume_series = hypervolume_series(outcome.history, hv);
        row.final_hypervolume = row.hypervolume_series.back();
        row.best_sum = best_sum(outcome.history);
        const auto baseline = random_search(user, cond.budget(), session_seed);
        row.baseline_hypervolume = history_hypervolume(baseline, hv);
        row.baseline_best_sum = best_sum(baseline);
        rep.rows[u] = std::move(row);
        rep.sessions[u] = std::move(outcome);
    };

    const int workers = std::max(1, opt.workers);
    if (workers == 1) {
        for (std::size_t u = 0; u < rep.users.size(); ++u) run_one(u);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex fail_mu;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t u = next++; u < rep.users.size(); u = next++) {
                    try {
                        run_one(u);
                    } catch (...) {
                        std::lock_guard lock(fail_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    return rep;
}

inline std::string summary_csv(const SimulationReport& rep, ConditionId condition) {
    std::ostringstream os;
    os << "condition,user,session,observations,stopped_early,final_hypervolume,best_sum,"
          "baseline_hypervolume,baseline_best_sum\n";
    char buf[256];
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%s,%d,%d,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(condition)).c_str(),
                      r.user, r.session_id.c_str(), r.observations, r.stopped_early ? 1 : 0, r.final_hypervolume,
                      r.best_sum, r.baseline_hypervolume, r.baseline_best_sum);
        os << buf;
    }
    return os.str();
}

/// Writes logs/<session>.jsonl, users.json and summary.csv under `out`.
inline void write_simulation(const SimulationReport& rep, ConditionId condition, const std::filesystem::path& out) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out / "logs", ec);
    if (ec) throw Error("cannot create " + (out / "logs").string() + ": " + ec.message());
    for (const auto& s : rep.sessions) {
        const auto path = out / "logs" / (s.session_id + ".jsonl");
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw Error("cannot write " + path.string());
        for (const auto& e : s.events) f << e.dump() << '\n';
    }
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : rep.users) users.push_back(to_json(u));
    {
        std::ofstream f(out / "users.json", std::ios::trunc);
        if (!f) throw Error("cannot write " + (out / "users.json").string());
        f << users.dump(2) << '\n';
    }
    std::ofstream f(out / "summary.csv", std::ios::trunc);
    if (!f) throw Error("cannot write " + (out / "summary.csv").string());
    f << summary_csv(rep, condition);
}

} // namespace hitl

#endif // HITL_CAMPAIGN_HPP
