#ifndef HITL_SESSION_HPP
#define HITL_SESSION_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "acquisition.hpp"
#include "design_space.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "objectives.hpp"
#include "pareto.hpp"
#include "seeding.hpp"
#include "sobol.hpp"

namespace hitl {

// -- Conditions ----------------------------------------------------------------

enum class ConditionId { C1_no_vis, C2_expert_static, C3_custom_static, C4_cold_start, C5_expert_warm, C6_user_warm };

inline constexpr std::array<std::string_view, 6> kConditionNames{
    "C1_no_vis", "C2_expert_static", "C3_custom_static", "C4_cold_start", "C5_expert_warm", "C6_user_warm"};

inline std::string_view to_string(ConditionId c) { return kConditionNames[static_cast<std::size_t>(c)]; }

/// Accepts the full name ("C4_cold_start") or the short code ("C4").
inline ConditionId condition_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kConditionNames.size(); ++i) {
        const auto name = kConditionNames[i];
        if (s == name || s == name.substr(0, 2)) return static_cast<ConditionId>(i);
    }
    throw ConfigError("unknown condition '" + std::string(s) + "'");
}

struct CampaignCondition {
    ConditionId id = ConditionId::C4_cold_start;
    int sampling_iterations = 0;
    int optimization_iterations = 0;
    std::optional<DesignPoint> seed_design;  // raw

    bool is_static() const { return id <= ConditionId::C3_custom_static; }
    bool is_warm() const { return id == ConditionId::C5_expert_warm || id == ConditionId::C6_user_warm; }

    /// Observations at finish: seed + sampling + optimization, or 1 for static designs.
    int budget() const {
        if (is_static()) return 1;
        return (is_warm() ? 1 : 0) + sampling_iterations + optimization_iterations;
    }

    void validate() const {
        if (sampling_iterations < 0 || optimization_iterations < 0) throw ConfigError("iteration counts must be >= 0");
        if ((id == ConditionId::C3_custom_static || is_warm()) && !seed_design)
            throw ConfigError(std::string(to_string(id)) + " requires a seed design");
        if (seed_design) hitl::validate(*seed_design);
        if (!is_static() && budget() < 1) throw ConfigError("condition has no evaluations");
    }
};

/// Condition with its default schedule. C1, C2 and C5 fill in their fixed designs.
inline CampaignCondition make_condition(ConditionId id, std::optional<DesignPoint> seed_design = std::nullopt) {
    CampaignCondition c{id, 0, 0, std::move(seed_design)};
    if (c.seed_design) c.seed_design = from_unit(*c.seed_design);
    switch (id) {
    case ConditionId::C1_no_vis: c.seed_design = all_off_design(); break;
    case ConditionId::C2_expert_static: c.seed_design = expert_preset(); break;
    case ConditionId::C3_custom_static: break;
    case ConditionId::C4_cold_start:
        c.sampling_iterations = 5;
        c.optimization_iterations = 10;
        break;
    case ConditionId::C5_expert_warm:
        if (!c.seed_design) c.seed_design = expert_preset();
        c.optimization_iterations = 10;
        break;
    case ConditionId::C6_user_warm: c.optimization_iterations = 10; break;
    }
    return c;
}

inline nlohmann::json to_json(const CampaignCondition& c) {
    nlohmann::json j{{"id", to_string(c.id)},
                     {"sampling_iterations", c.sampling_iterations},
                     {"optimization_iterations", c.optimization_iterations}};
    j["seed_design"] = c.seed_design ? to_json(*c.seed_design) : nlohmann::json(nullptr);
    return j;
}

inline CampaignCondition condition_from_json(const nlohmann::json& j) {
    CampaignCondition c;
    c.id = condition_from_string(j.at("id").get<std::string>());
    c.sampling_iterations = j.at("sampling_iterations").get<int>();
    c.optimization_iterations = j.at("optimization_iterations").get<int>();
    if (j.contains("seed_design") && !j["seed_design"].is_null())
        c.seed_design = design_from_json(j["seed_design"], Encoding::raw);
    c.validate();
    return c;
}

struct StoppingPolicy {
    int consecutive_required = 2;
    void validate() const {
        if (consecutive_required < 1) throw ConfigError("stopping policy needs consecutive_required >= 1");
    }
};

struct EngineConfig {
    AcquisitionConfig acquisition{};
    GpFitConfig gp{};
    StoppingPolicy stopping{};
};

inline nlohmann::json to_json(const EngineConfig& c) {
    return {{"acquisition", to_json(c.acquisition)},
            {"gp", {{"restarts", c.gp.restarts}, {"max_iterations", c.gp.max_iterations}}},
            {"stopping", {{"consecutive_required", c.stopping.consecutive_required}}}};
}

/// Reads a campaign config file body; keys mirror the config structs.
inline EngineConfig engine_config_from_json(const nlohmann::json& j, EngineConfig c = {}) {
    if (j.contains("acquisition")) c.acquisition = acquisition_config_from_json(j["acquisition"], c.acquisition);
    if (j.contains("gp")) {
        c.gp.restarts = j["gp"].value("restarts", c.gp.restarts);
        c.gp.max_iterations = j["gp"].value("max_iterations", c.gp.max_iterations);
    }
    if (j.contains("stopping"))
        c.stopping.consecutive_required = j["stopping"].value("consecutive_required", c.stopping.consecutive_required);
    c.stopping.validate();
    return c;
}

// -- Proposers -----------------------------------------------------------------

struct ProposalRecord {
    DesignPoint unit;
    std::optional<double> acquisition;
    bool flat = false;
    nlohmann::json model = nullptr;  // fitted hyperparameters, when a GP was used
};

/// Produces the next unit-cube design from the history and a per-iteration seed.
using Proposer = std::function<ProposalRecord(const std::vector<Observation>&, std::uint64_t)>;

inline std::vector<Point> observed_points(const std::vector<Observation>& history) {
    std::vector<Point> ys;
    ys.reserve(history.size());
    for (const auto& o : history) ys.emplace_back(o.y.begin(), o.y.end());
    return ys;
}

/// GP fit on the full history followed by EHVI maximization.
inline Proposer mobo_proposer(EngineConfig cfg) {
    return [cfg](const std::vector<Observation>& history, std::uint64_t seed) {
        const Eigen::MatrixXd X = design_matrix(history), Y = objective_matrix(history);
        GpFitConfig gp = cfg.gp;
        gp.seed = derive_seed(seed, 1);
        SurrogateModel model;
        if (history.size() >= 2) {
            try {
                model = fit(X, Y, gp);
            } catch (const FitError&) {
                model = fit_fixed(X, Y, default_hyperparams(kNumParams));
            }
        } else {
            model = fit_fixed(X, Y, default_hyperparams(kNumParams));
        }
        AcquisitionConfig acq = cfg.acquisition;
        acq.seed = derive_seed(seed, 2);
        const auto front = pareto_front(observed_points(history));
        const Proposal p = propose_next(model, front.points, acq);
        std::array<double, kNumParams> u{};
        for (std::size_t k = 0; k < kNumParams; ++k) u[k] = p.x[static_cast<Eigen::Index>(k)];
        return ProposalRecord{DesignPoint::unit(u), p.acquisition.value, p.flat, hyperparams_json(model)};
    };
}

/// Quasi-random proposer that ignores the data. Useful for fast protocol tests.
inline Proposer sobol_proposer() {
    return [](const std::vector<Observation>& history, std::uint64_t seed) {
        SobolSequence s(static_cast<int>(kNumParams), true, seed);
        const auto p = s.next();
        std::array<double, kNumParams> u{};
        std::copy(p.begin(), p.end(), u.begin());
        (void)history;
        return ProposalRecord{DesignPoint::unit(u), std::nullopt, false, nullptr};
    };
}

// -- Session ---------------------------------------------------------------------

enum class SessionPhase { awaiting_rating, proposing, stopped, finished };

inline std::string_view to_string(SessionPhase p) {
    switch (p) {
    case SessionPhase::awaiting_rating: return "awaiting_rating";
    case SessionPhase::proposing: return "proposing";
    case SessionPhase::stopped: return "stopped";
    case SessionPhase::finished: return "finished";
    }
    return "?";
}

/// Pareto members with their designs in raw units.
struct DesignFront {
    ParetoFront front;                 // member_indices index the history
    std::vector<DesignPoint> designs;  // raw
    std::vector<int> iterations;
    std::size_t best = 0;              // position (within the front) of the max-sum member

    std::size_t size() const { return front.size(); }
};

inline DesignFront extract_front(const std::vector<Observation>& history) {
    if (history.empty()) throw StateError("cannot extract a front from an empty history");
    DesignFront out;
    out.front = pareto_front(observed_points(history));
    double best_sum = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.front.size(); ++i) {
        const auto& obs = history[out.front.member_indices[i]];
        out.designs.push_back(from_unit(obs.x));
        out.iterations.push_back(obs.iteration);
        const double s = std::accumulate(obs.y.begin(), obs.y.end(), 0.0);
        if (s > best_sum) {
            best_sum = s;
            out.best = i;
        }
    }
    return out;
}

inline nlohmann::json to_json(const DesignFront& f) {
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < f.size(); ++i) {
        members.push_back({{"observation", f.front.member_indices[i]},
                           {"iteration", f.iterations[i]},
                           {"design_raw", to_json(f.designs[i])},
                           {"y", f.front.points[i]}});
    }
    return {{"members", members}, {"best", f.best}};
}

/// Milliseconds; injectable so simulated runs can use logical time.
using Clock = std::function<std::int64_t()>;

inline Clock wall_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

/// Deterministic clock: 0, 1, 2, ...
inline Clock logical_clock() {
    return [t = std::int64_t{0}]() mutable { return t++; };
}

using EventSink = std::function<void(const nlohmann::json&)>;

struct SessionOptions {
    EngineConfig config{};
    Proposer proposer{};  // defaults to mobo_proposer(config)
    Clock clock{};        // defaults to wall_clock()
    EventSink sink{};     // receives every log event before the mutation returns
    std::string id{};     // defaults to a seed-derived token
};

struct SubmitResult {
    enum class Kind { next, stopped, finished };
    Kind kind = Kind::next;
    std::optional<DesignPoint> next;   // raw
    std::optional<DesignFront> front;  // on stopped/finished
};

/// Single-writer HITL state machine. Callers serialize access.
class Session {
public:
    /// Creates the session and emits its first design (raw units).
    static std::pair<Session, DesignPoint> start(CampaignCondition condition, std::uint64_t seed, SessionOptions opt = {}) {
        condition.validate();
        opt.config.stopping.validate();
        opt.config.acquisition.validate();
        Session s;
        s.condition_ = std::move(condition);
        s.rng_seed_ = seed;
        s.config_ = opt.config;
        s.proposer_ = opt.proposer ? std::move(opt.proposer) : mobo_proposer(opt.config);
        s.clock_ = opt.clock ? std::move(opt.clock) : wall_clock();
        s.sink_ = std::move(opt.sink);
        s.id_ = opt.id.empty() ? make_id(seed) : std::move(opt.id);
        s.created_ms_ = s.updated_ms_ = s.clock_();
        s.emit({{"event", "session_created"},
                {"t", s.created_ms_},
                {"session", s.id_},
                {"condition", to_json(s.condition_)},
                {"seed", s.rng_seed_},
                {"config", to_json(s.config_)}});

        ProposalRecord first;
        Phase phase;
        if (s.condition_.is_static()) {
            first.unit = to_unit(*s.condition_.seed_design);
            phase = Phase::static_eval;
        } else if (s.condition_.is_warm()) {
            first.unit = to_unit(*s.condition_.seed_design);
            phase = Phase::warmstart_seed;
        } else if (s.condition_.sampling_iterations > 0) {
            first.unit = s.sampling_design(0);
            phase = Phase::sampling;
        } else {
            s.phase_ = SessionPhase::proposing;
            first = s.proposer_(s.history_, derive_seed(s.rng_seed_, 0));
            phase = Phase::optimization;
        }
        s.present(first, phase, s.updated_ms_);
        DesignPoint raw = s.current_design();
        return {std::move(s), std::move(raw)};
    }

    SubmitResult submit_rating(const RatingVector& r) {
        if (phase_ != SessionPhase::awaiting_rating)
            throw StateError("session " + id_ + " is " + std::string(to_string(phase_)) + ", not awaiting a rating");
        validate(r);
        const std::int64_t now = clock_();
        updated_ms_ = now;
        const bool perfect = is_perfect(r);
        Observation obs{current_, normalize(r), static_cast<int>(history_.size()), current_phase_};
        history_.push_back(obs);
        consecutive_perfect_ = perfect ? consecutive_perfect_ + 1 : 0;
        emit({{"event", "rating"},
              {"t", now},
              {"iteration", obs.iteration},
              {"items", r.flatten()},
              {"y", obs.y},
              {"perfect", perfect},
              {"consecutive_perfect", consecutive_perfect_}});

        SubmitResult res;
        if (consecutive_perfect_ >= config_.stopping.consecutive_required) {
            phase_ = SessionPhase::stopped;
            res.kind = SubmitResult::Kind::stopped;
        } else if (static_cast<int>(history_.size()) >= condition_.budget()) {
            phase_ = SessionPhase::finished;
            res.kind = SubmitResult::Kind::finished;
        }
        if (res.kind != SubmitResult::Kind::next) {
            res.front = hitl::extract_front(history_);
            emit({{"event", std::string(to_string(phase_))},
                  {"t", now},
                  {"observations", history_.size()},
                  {"front", to_json(*res.front)}});
            return res;
        }

        phase_ = SessionPhase::proposing;
        const int sampled = sampled_count();
        ProposalRecord next;
        Phase phase;
        if (sampled < condition_.sampling_iterations) {
            next.unit = sampling_design(sampled);
            phase = Phase::sampling;
        } else {
            phase = Phase::optimization;
            try {
                next = proposer_(history_, derive_seed(rng_seed_, history_.size()));
            } catch (const std::exception& ex) {
                // Keep the session usable: fall back to the next quasi-random design.
                emit({{"event", "proposal_error"}, {"t", now}, {"iteration", iteration()}, {"what", ex.what()}});
                next = ProposalRecord{sampling_design(static_cast<int>(history_.size())), std::nullopt, false, nullptr};
            }
        }
        present(next, phase, now);
        res.next = current_design();
        return res;
    }

    /// Non-dominated observations; only once the session has ended.
    DesignFront extract_front() const {
        if (phase_ != SessionPhase::stopped && phase_ != SessionPhase::finished)
            throw StateError("session " + id_ + " has not ended");
        return hitl::extract_front(history_);
    }

    const std::string& id() const { return id_; }
    const CampaignCondition& condition() const { return condition_; }
    const std::vector<Observation>& history() const { return history_; }
    SessionPhase phase() const { return phase_; }
    int consecutive_perfect() const { return consecutive_perfect_; }
    std::uint64_t rng_seed() const { return rng_seed_; }
    const EngineConfig& config() const { return config_; }
    std::int64_t created_ms() const { return created_ms_; }
    std::int64_t updated_ms() const { return updated_ms_; }
    bool ended() const { return phase_ == SessionPhase::stopped || phase_ == SessionPhase::finished; }
    /// Index of the observation the next rating will create.
    int iteration() const { return static_cast<int>(history_.size()); }

    /// Design awaiting a rating (raw). Meaningless once the session has ended.
    DesignPoint current_design() const { return from_unit(current_); }
    Phase current_design_phase() const { return current_phase_; }

    nlohmann::json snapshot() const {
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& o : history_) {
            hist.push_back({{"iteration", o.iteration},
                            {"phase", to_string(o.phase)},
                            {"x_unit", to_json(o.x)},
                            {"design_raw", to_json(from_unit(o.x))},
                            {"y", o.y}});
        }
        nlohmann::json j{{"session", id_},
                         {"condition", to_json(condition_)},
                         {"phase", to_string(phase_)},
                         {"iteration", iteration()},
                         {"budget", condition_.budget()},
                         {"consecutive_perfect", consecutive_perfect_},
                         {"rng_seed", rng_seed_},
                         {"created_ms", created_ms_},
                         {"updated_ms", updated_ms_},
                         {"history", hist}};
        j["current_design"] = ended() ? nlohmann::json(nullptr) : to_json(current_design());
        j["current_design_phase"] = ended() ? nlohmann::json(nullptr) : nlohmann::json(to_string(current_phase_));
        return j;
    }

    /// Rebuilds a session by re-running the logged ratings. Every logged design
    /// must be reproduced exactly; otherwise throws.
    static Session replay(const std::vector<nlohmann::json>& events, SessionOptions opt = {}) {
        if (events.empty() || events.front().value("event", "") != "session_created")
            throw ConfigError("log does not start with a session_created event");
        const auto& created = events.front();
        opt.config = engine_config_from_json(created.at("config"), opt.config);
        opt.id = created.at("session").get<std::string>();
        opt.sink = nullptr;
        // The session reads the clock once at creation and once per rating.
        std::vector<std::int64_t> times{created.at("t").get<std::int64_t>()};
        for (const auto& e : events)
            if (e.value("event", "") == "rating") times.push_back(e.at("t").get<std::int64_t>());
        opt.clock = [times, i = std::size_t{0}]() mutable { return times.at(std::min(i++, times.size() - 1)); };

        auto [session, first] = start(condition_from_json(created.at("condition")), created.at("seed").get<std::uint64_t>(),
                                      std::move(opt));
        std::optional<DesignPoint> shown = first;
        for (std::size_t k = 1; k < events.size(); ++k) {
            const auto& e = events[k];
            const std::string kind = e.at("event").get<std::string>();
            if (kind == "design") {
                const DesignPoint logged = design_from_json(e.at("design_raw"), Encoding::raw);
                if (!shown || !(logged == *shown))
                    throw Error("log replay diverged at iteration " + std::to_string(e.value("iteration", -1)));
                shown.reset();
            } else if (kind == "rating") {
                const auto items = e.at("items").get<std::vector<double>>();
                const auto res = session.submit_rating(RatingVector::from_flat(items));
                shown = res.next;
            }
        }
        return session;
    }

    void set_sink(EventSink sink) { sink_ = std::move(sink); }

private:
    Session() = default;

    static std::string make_id(std::uint64_t seed) {
        static constexpr char kHex[] = "0123456789abcdef";
        std::uint64_t v = splitmix64(seed ^ 0xC0FFEEULL);
        std::string id = "s-";
        for (int i = 0; i < 12; ++i, v >>= 4) id.push_back(kHex[v & 0xF]);
        return id;
    }

    int sampled_count() const {
        int n = 0;
        for (const auto& o : history_) n += o.phase == Phase::sampling ? 1 : 0;
        return n;
    }

    DesignPoint sampling_design(int index) const {
        SobolSequence s(static_cast<int>(kNumParams), true, derive_seed(rng_seed_, 0x50B01ULL));
        std::vector<double> p;
        for (int i = 0; i <= index; ++i) p = s.next();
        std::array<double, kNumParams> u{};
        std::copy(p.begin(), p.end(), u.begin());
        return DesignPoint::unit(u);
    }

    void present(const ProposalRecord& rec, Phase phase, std::int64_t now) {
        validate(rec.unit);
        current_ = to_unit(rec.unit);
        current_phase_ = phase;
        phase_ = SessionPhase::awaiting_rating;
        nlohmann::json e{{"event", "design"},
                         {"t", now},
                         {"iteration", iteration()},
                         {"phase", to_string(phase)},
                         {"design_raw", to_json(current_design())}};
        if (rec.acquisition) e["acquisition"] = *rec.acquisition;
        if (rec.flat) e["acquisition_flat"] = true;
        if (!rec.model.is_null()) e["model"] = rec.model;
        emit(e);
    }

    void emit(const nlohmann::json& e) const {
        if (sink_) sink_(e);
    }

    std::string id_;
    CampaignCondition condition_;
    EngineConfig config_;
    Proposer proposer_;
    Clock clock_;
    EventSink sink_;
    std::vector<Observation> history_;
    DesignPoint current_ = DesignPoint::unit({});
    Phase current_phase_ = Phase::sampling;
    SessionPhase phase_ = SessionPhase::awaiting_rating;
    int consecutive_perfect_ = 0;
    std::uint64_t rng_seed_ = 0;
    std::int64_t created_ms_ = 0;
    std::int64_t updated_ms_ = 0;
};

} // namespace hitl

#endif // HITL_SESSION_HPP
