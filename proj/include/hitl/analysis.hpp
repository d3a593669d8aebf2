#ifndef HITL_ANALYSIS_HPP
#define HITL_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "campaign.hpp"
#include "design_space.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "objectives.hpp"
#include "pareto.hpp"
#include "protocol.hpp"
#include "session.hpp"

namespace hitl {

/// Observations recovered from a session's JSONL log.
struct SessionLog {
    std::string path;
    std::string session_id;
    std::string condition;
    std::vector<Observation> history;  // x in raw units
    std::string end_state;             // "stopped", "finished" or "" (still running)
};

inline SessionLog parse_session_log(const std::vector<nlohmann::json>& events, std::string path = {}) {
    if (events.empty() || events.front().value("event", "") != "session_created")
        throw Error("log " + path + " does not start with session_created");
    SessionLog log;
    log.path = std::move(path);
    log.session_id = events.front().at("session").get<std::string>();
    log.condition = events.front().at("condition").at("id").get<std::string>();
    std::map<int, std::pair<DesignPoint, Phase>> designs;
    for (const auto& e : events) {
        const std::string kind = e.at("event").get<std::string>();
        if (kind == "design") {
            designs[e.at("iteration").get<int>()] = {design_from_json(e.at("design_raw"), Encoding::raw),
                                                     phase_from_string(e.at("phase").get<std::string>())};
        } else if (kind == "rating") {
            const int it = e.at("iteration").get<int>();
            const auto d = designs.find(it);
            if (d == designs.end()) throw Error("log " + log.path + ": rating for iteration " + std::to_string(it) +
                                                " without a design");
            Observation o;
            o.x = d->second.first;
            o.phase = d->second.second;
            o.iteration = it;
            o.y = e.at("y").get<ObjectiveVector>();
            log.history.push_back(o);
        } else if (kind == "stopped" || kind == "finished") {
            log.end_state = kind;
        }
    }
    return log;
}

inline SessionLog load_session_log(const std::filesystem::path& path) {
    return parse_session_log(read_jsonl(path), path.string());
}

/// Expands directories to their *.jsonl files (sorted) and keeps plain files.
inline std::vector<std::filesystem::path> collect_logs(const std::vector<std::filesystem::path>& inputs) {
    std::vector<std::filesystem::path> out;
    for (const auto& p : inputs) {
        if (std::filesystem::is_directory(p)) {
            std::vector<std::filesystem::path> found;
            for (const auto& f : std::filesystem::directory_iterator(p))
                if (f.path().extension() == ".jsonl") found.push_back(f.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (std::filesystem::exists(p)) {
            out.push_back(p);
        } else {
            throw Error("no such log: " + p.string());
        }
    }
    return out;
}

struct ConvergenceRow {
    int iteration = 0;
    int sessions = 0;
    int padded = 0;  // sessions that had already ended and contribute their last value
    ObjectiveVector mean_y{};
    double mean_hypervolume = 0.0;
};

struct HypervolumePoint {
    std::string session_id;
    int iteration = 0;
    double hypervolume = 0.0;
    bool padded = false;
};

struct ParameterQuartiles {
    std::string param;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    int n = 0;
};

struct ConditionAnalysis {
    std::string condition;
    std::vector<std::string> sessions;
    std::vector<ConvergenceRow> convergence;
    std::vector<HypervolumePoint> hypervolume;
    std::vector<ParameterQuartiles> front_parameters;  // unit-normalized
    std::vector<std::string> stopped_early;
};

struct AnalysisResult {
    std::vector<ConditionAnalysis> conditions;  // one per condition, never merged
    bool mixed_conditions = false;
};

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Per-condition convergence tables. Sessions that end early are padded with
/// their last value and counted in `padded`.
inline AnalysisResult analyze(const std::vector<SessionLog>& logs, const Point& reference_point) {
    AnalysisResult res;
    std::map<std::string, std::vector<const SessionLog*>> by_cond;
    for (const auto& l : logs) by_cond[l.condition].push_back(&l);
    res.mixed_conditions = by_cond.size() > 1;
    const HypervolumeConfig hv = summary_hv_config(reference_point);

    for (const auto& [cond, group] : by_cond) {
        ConditionAnalysis ca;
        ca.condition = cond;
        std::size_t horizon = 0;
        std::vector<std::vector<double>> series;
        for (const auto* l : group) {
            if (l->history.empty()) continue;
            ca.sessions.push_back(l->session_id);
            horizon = std::max(horizon, l->history.size());
            std::vector<Observation> unit_hist = l->history;
            for (auto& o : unit_hist) o.x = to_unit(o.x);
            series.push_back(hypervolume_series(unit_hist, hv));
            if (l->end_state == "stopped") ca.stopped_early.push_back(l->session_id);
        }
        std::size_t si = 0;
        for (std::size_t k = 0; k < horizon; ++k) {
            ConvergenceRow row;
            row.iteration = static_cast<int>(k);
            si = 0;
            for (const auto* l : group) {
                if (l->history.empty()) continue;
                const bool pad = k >= l->history.size();
                const auto& obs = l->history[std::min(k, l->history.size() - 1)];
                for (std::size_t j = 0; j < kNumObjectives; ++j) row.mean_y[j] += obs.y[j];
                const double h = series[si][std::min(k, series[si].size() - 1)];
                row.mean_hypervolume += h;
                row.sessions += 1;
                row.padded += pad ? 1 : 0;
                ca.hypervolume.push_back({l->session_id, static_cast<int>(k), h, pad});
                ++si;
            }
            for (auto& v : row.mean_y) v /= row.sessions;
            row.mean_hypervolume /= row.sessions;
            ca.convergence.push_back(row);
        }

        std::vector<std::vector<double>> per_param(kNumParams);
        for (const auto* l : group) {
            if (l->history.empty()) continue;
            const auto front = extract_front(l->history);
            for (const auto& d : front.designs) {
                const DesignPoint u = to_unit(d);
                for (std::size_t i = 0; i < kNumParams; ++i) per_param[i].push_back(u.values[i]);
            }
        }
        for (std::size_t i = 0; i < kNumParams; ++i) {
            ParameterQuartiles q;
            q.param = std::string(catalog().params[i].id);
            q.n = static_cast<int>(per_param[i].size());
            q.q1 = quantile(per_param[i], 0.25);
            q.median = quantile(per_param[i], 0.5);
            q.q3 = quantile(per_param[i], 0.75);
            ca.front_parameters.push_back(q);
        }
        res.conditions.push_back(std::move(ca));
    }
    return res;
}

namespace detail {
inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}
} // namespace detail

inline std::string convergence_csv(const ConditionAnalysis& ca) {
    std::ostringstream os;
    os << "condition,iteration,sessions,padded";
    for (const auto& s : kObjectives) os << ',' << s.name;
    os << ",hypervolume\n";
    for (const auto& r : ca.convergence) {
        os << ca.condition << ',' << r.iteration << ',' << r.sessions << ',' << r.padded;
        for (double v : r.mean_y) os << ',' << detail::fmt6(v);
        os << ',' << detail::fmt6(r.mean_hypervolume) << '\n';
    }
    return os.str();
}

inline std::string hypervolume_csv(const ConditionAnalysis& ca) {
    std::ostringstream os;
    os << "condition,session,iteration,hypervolume,padded\n";
    for (const auto& p : ca.hypervolume)
        os << ca.condition << ',' << p.session_id << ',' << p.iteration << ',' << detail::fmt6(p.hypervolume) << ','
           << (p.padded ? 1 : 0) << '\n';
    return os.str();
}

inline std::string front_parameters_csv(const ConditionAnalysis& ca) {
    std::ostringstream os;
    os << "condition,param,n,q1,median,q3\n";
    for (const auto& q : ca.front_parameters)
        os << ca.condition << ',' << q.param << ',' << q.n << ',' << detail::fmt6(q.q1) << ','
           << detail::fmt6(q.median) << ',' << detail::fmt6(q.q3) << '\n';
    return os.str();
}

/// Front members with iteration, raw parameters p1..p16 and the six objectives.
inline std::string export_front_csv(const SessionLog& log) {
    if (log.history.empty()) throw Error("log " + log.path + " has no rated observations");
    const auto front = extract_front(log.history);
    std::ostringstream os;
    os << "iteration";
    for (const auto& p : catalog().params) os << ',' << p.id;
    for (const auto& s : kObjectives) os << ',' << s.name;
    os << '\n';
    for (std::size_t i = 0; i < front.size(); ++i) {
        os << front.iterations[i];
        for (double v : front.designs[i].values) os << ',' << detail::fmt6(v);
        for (double v : front.front.points[i]) os << ',' << detail::fmt6(v);
        os << '\n';
    }
    return os.str();
}

} // namespace hitl

#endif // HITL_ANALYSIS_HPP
