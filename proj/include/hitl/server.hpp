#ifndef HITL_SERVER_HPP
#define HITL_SERVER_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "design_space.hpp"
#include "errors.hpp"
#include "objectives.hpp"
#include "protocol.hpp"
#include "session.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a `_res` macro.
#include <httplib.h>

namespace hitl {

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Another mutation is in flight, or the request targets a stale iteration.
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Owns live sessions. Mutations on one session are serialized; a second
/// concurrent mutation is rejected rather than queued. Every event reaches the
/// session's JSONL log before the mutating call returns.
class SessionRegistry {
public:
    struct Options {
        std::filesystem::path log_dir;  // empty -> no persistence
        EngineConfig config{};
        Proposer proposer{};            // empty -> GP + EHVI
    };

    explicit SessionRegistry(Options opt) : opt_(std::move(opt)) {
        if (!opt_.log_dir.empty()) std::filesystem::create_directories(opt_.log_dir);
    }

    const Options& options() const { return opt_; }

    /// Returns the new session's snapshot.
    nlohmann::json create(CampaignCondition condition, std::optional<std::uint64_t> seed) {
        const std::uint64_t s = seed ? *seed : std::random_device{}() * 0x100000001ULL + counter_.fetch_add(1);
        auto entry = std::make_shared<Entry>();
        const std::string id = "s" + std::to_string(counter_.fetch_add(1)) + "-" + std::to_string(splitmix64(s) % 1000000);
        if (!opt_.log_dir.empty()) entry->log = std::make_unique<JsonlWriter>(opt_.log_dir / (id + ".jsonl"));
        SessionOptions so{opt_.config, opt_.proposer, {}, sink_for(*entry), id};
        auto started = Session::start(std::move(condition), s, std::move(so));
        entry->session.emplace(std::move(started.first));
        std::lock_guard lock(map_mu_);
        sessions_[id] = entry;
        return entry->session->snapshot();
    }

    /// Runs `fn` on the session under its lock. Read-only calls wait; mutating
    /// calls fail with ConflictError when the session is busy.
    template <class F>
    auto with_session(const std::string& id, bool mutate, F&& fn) {
        auto entry = find(id);
        std::unique_lock lock(entry->mu, std::defer_lock);
        if (mutate) {
            if (!lock.try_lock()) throw ConflictError("session " + id + " has a request in flight");
        } else {
            lock.lock();
        }
        return fn(*entry->session);
    }

    std::vector<std::string> ids() const {
        std::lock_guard lock(map_mu_);
        std::vector<std::string> out;
        for (const auto& [id, e] : sessions_) out.push_back(id);
        return out;
    }

    /// Reloads every session log in the log directory. Returns how many were restored.
    std::size_t recover() {
        if (opt_.log_dir.empty()) return 0;
        std::size_t n = 0;
        for (const auto& f : std::filesystem::directory_iterator(opt_.log_dir)) {
            if (f.path().extension() != ".jsonl") continue;
            auto events = read_jsonl(f.path());
            if (events.empty()) continue;
            SessionOptions so{opt_.config, opt_.proposer, {}, {}, {}};
            Session s = Session::replay(events, std::move(so));
            auto entry = std::make_shared<Entry>();
            entry->log = std::make_unique<JsonlWriter>(f.path());
            s.set_sink(sink_for(*entry));
            entry->session.emplace(std::move(s));
            std::lock_guard lock(map_mu_);
            sessions_[entry->session->id()] = entry;
            ++n;
        }
        return n;
    }

private:
    struct Entry {
        std::mutex mu;
        std::optional<Session> session;
        std::unique_ptr<JsonlWriter> log;
    };

    static EventSink sink_for(Entry& e) {
        return [&e](const nlohmann::json& ev) {
            if (e.log) e.log->append(ev);
        };
    }

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(map_mu_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
        return it->second;
    }

    Options opt_;
    mutable std::mutex map_mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::atomic<std::uint64_t> counter_{1};
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body = nlohmann::json::object();
    std::string text;  // non-empty for text/csv responses
};

/// HTTP-independent request handlers.
class Api {
public:
    explicit Api(SessionRegistry& registry) : reg_(registry) {}

    ApiResponse schema() const {
        return {200, {{"design_space", catalog_json()}, {"objectives", objective_schema_json()}}, {}};
    }

    /// Body: {"condition": "C4", "seed": 7, "seed_design": [16 raw values]}.
    ApiResponse create_session(const std::string& body) {
        return guarded([&] {
            const auto j = parse_body(body);
            if (!j.contains("condition") || !j["condition"].is_string())
                throw FieldError("condition", "missing string field 'condition'");
            const ConditionId cid = condition_from_string(j["condition"].get<std::string>());
            std::optional<DesignPoint> seed_design;
            if (j.contains("seed_design") && !j["seed_design"].is_null()) {
                try {
                    seed_design = design_from_json(j["seed_design"], Encoding::raw);
                } catch (const Error& e) {
                    throw FieldError("seed_design", e.what());
                }
            }
            std::optional<std::uint64_t> seed;
            if (j.contains("seed")) {
                if (!j["seed"].is_number_unsigned()) throw FieldError("seed", "seed must be a nonnegative integer");
                seed = j["seed"].get<std::uint64_t>();
            }
            const auto snap = reg_.create(make_condition(cid, seed_design), seed);
            return ApiResponse{201, summary(snap, true), {}};
        });
    }

    ApiResponse design(const std::string& id) {
        return guarded([&] {
            return reg_.with_session(id, false, [&](Session& s) {
                if (s.ended()) throw StateError("session " + id + " has ended; no design pending");
                return ApiResponse{200, design_body(s), {}};
            });
        });
    }

    /// Body: {"iteration": k, "items": [14 raw values]}. `iteration` is optional
    /// but, when given, must match the pending iteration.
    ApiResponse submit_rating(const std::string& id, const std::string& body) {
        return guarded([&] {
            const auto j = parse_body(body);
            if (!j.contains("items") || !j["items"].is_array()) throw FieldError("items", "missing array field 'items'");
            std::vector<double> items;
            for (std::size_t i = 0; i < j["items"].size(); ++i) {
                if (!j["items"][i].is_number()) throw FieldError("items[" + std::to_string(i) + "]", "not a number");
                items.push_back(j["items"][i].get<double>());
            }
            RatingVector r;
            try {
                r = RatingVector::from_flat(items);
                validate(r);
            } catch (const ValidationError& e) {
                throw FieldError("items", e.what());
            }
            std::optional<int> iteration;
            if (j.contains("iteration")) {
                if (!j["iteration"].is_number_integer()) throw FieldError("iteration", "iteration must be an integer");
                iteration = j["iteration"].get<int>();
            }
            return reg_.with_session(id, true, [&](Session& s) {
                check_iteration(s, iteration);
                const auto res = s.submit_rating(r);
                nlohmann::json out = summary(s.snapshot(), false);
                if (res.next) out.update(design_body(s));
                if (res.front) out["front"] = to_json(*res.front);
                return ApiResponse{200, out, {}};
            });
        });
    }

    ApiResponse status(const std::string& id) {
        return guarded([&] {
            return reg_.with_session(id, false, [](Session& s) { return ApiResponse{200, s.snapshot(), {}}; });
        });
    }

    ApiResponse front(const std::string& id) {
        return guarded([&] {
            return reg_.with_session(id, false, [](Session& s) {
                nlohmann::json out = summary(s.snapshot(), false);
                out["front"] = to_json(s.extract_front());
                return ApiResponse{200, out, {}};
            });
        });
    }

    ApiResponse csv_design(const std::string& id) {
        return guarded([&] {
            return reg_.with_session(id, false, [&](Session& s) {
                if (s.ended()) throw StateError("session " + id + " has ended; no design pending");
                return ApiResponse{200, {}, csv_emit_design(s.current_design())};
            });
        });
    }

    /// Takes one ratings line; answers with the next design line, or an empty
    /// body with status 200 and `X-Session-Phase` once the session ends.
    ApiResponse csv_rating(const std::string& id, const std::string& line) {
        return guarded([&] {
            const RatingVector r = csv_parse_ratings(line);
            return reg_.with_session(id, true, [&](Session& s) {
                const auto res = s.submit_rating(r);
                ApiResponse out{200, summary(s.snapshot(), false), {}};
                out.text = res.next ? csv_emit_design(*res.next) : std::string{};
                return out;
            });
        });
    }

private:
    class FieldError : public Error {
    public:
        FieldError(std::string field, const std::string& what) : Error(what), field_(std::move(field)) {}
        const std::string& field() const { return field_; }

    private:
        std::string field_;
    };

    static nlohmann::json parse_body(const std::string& body) {
        try {
            auto j = nlohmann::json::parse(body);
            if (!j.is_object()) throw FieldError("", "request body must be a JSON object");
            return j;
        } catch (const nlohmann::json::parse_error& e) {
            throw FieldError("", std::string("malformed JSON: ") + e.what());
        }
    }

    static void check_iteration(const Session& s, std::optional<int> iteration) {
        if (s.phase() != SessionPhase::awaiting_rating)
            throw ConflictError("session is " + std::string(to_string(s.phase())) + ", not awaiting a rating");
        if (iteration && *iteration != s.iteration())
            throw ConflictError("rating for iteration " + std::to_string(*iteration) + " but session is at iteration " +
                                std::to_string(s.iteration()));
    }

    static nlohmann::json summary(const nlohmann::json& snap, bool with_design) {
        nlohmann::json out{{"session", snap["session"]},
                           {"phase", snap["phase"]},
                           {"iteration", snap["iteration"]},
                           {"budget", snap["budget"]},
                           {"consecutive_perfect", snap["consecutive_perfect"]},
                           {"condition", snap["condition"]["id"]}};
        if (with_design && !snap["current_design"].is_null()) {
            const DesignPoint x = design_from_json(snap["current_design"], Encoding::raw);
            out["design_raw"] = to_json(x);
            out["rendered"] = to_json(render(x));
        }
        return out;
    }

    static nlohmann::json design_body(const Session& s) {
        const DesignPoint x = s.current_design();
        return {{"session", s.id()},
                {"phase", to_string(s.phase())},
                {"iteration", s.iteration()},
                {"budget", s.condition().budget()},
                {"design_phase", to_string(s.current_design_phase())},
                {"design_raw", to_json(x)},
                {"rendered", to_json(render(x))},
                {"schema", {{"design_space", catalog_json()}, {"objectives", objective_schema_json()}}}};
    }

    template <class F>
    static ApiResponse guarded(F&& fn) {
        auto err = [](int status, const std::string& kind, const std::string& msg, nlohmann::json extra = {}) {
            nlohmann::json body{{"error", kind}, {"message", msg}};
            if (extra.is_object()) body.update(extra);
            return ApiResponse{status, body, {}};
        };
        try {
            return fn();
        } catch (const NotFoundError& e) {
            return err(404, "not_found", e.what());
        } catch (const ConflictError& e) {
            return err(409, "conflict", e.what());
        } catch (const StateError& e) {
            return err(409, "conflict", e.what());
        } catch (const FieldError& e) {
            return err(400, "bad_request", e.what(), {{"field", e.field()}});
        } catch (const ParseError& e) {
            return err(400, "bad_request", e.what(), {{"field", e.field()}});
        } catch (const ValidationError& e) {
            return err(400, "bad_request", e.what(), {{"field", e.objective()}, {"index", e.index()}});
        } catch (const BoundsError& e) {
            return err(400, "bad_request", e.what(), {{"field", e.param_id()}});
        } catch (const ConfigError& e) {
            return err(400, "bad_request", e.what());
        } catch (const std::exception& e) {
            return err(500, "internal", e.what());
        }
    }

    SessionRegistry& reg_;
};

/// Registers the JSON and CSV routes on an httplib server.
inline void install_routes(httplib::Server& srv, Api& api) {
    auto send = [](httplib::Response& res, const ApiResponse& r, bool csv = false) {
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        if (r.body.contains("phase")) res.set_header("X-Session-Phase", r.body["phase"].get<std::string>());
        if (csv && r.status == 200) res.set_content(r.text, "text/csv");
        else res.set_content(r.body.dump(), "application/json");
    };
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    srv.Get("/api/schema", [&api, send](const httplib::Request&, httplib::Response& res) { send(res, api.schema()); });
    srv.Post("/api/sessions", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.create_session(req.body));
    });
    srv.Get(R"(/api/sessions/([^/]+))", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.status(req.matches[1]));
    });
    srv.Get(R"(/api/sessions/([^/]+)/design)", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.design(req.matches[1]));
    });
    srv.Post(R"(/api/sessions/([^/]+)/ratings)", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.submit_rating(req.matches[1], req.body));
    });
    srv.Get(R"(/api/sessions/([^/]+)/front)", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.front(req.matches[1]));
    });
    srv.Get(R"(/api/sessions/([^/]+)/design\.csv)", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.csv_design(req.matches[1]), true);
    });
    srv.Post(R"(/api/sessions/([^/]+)/ratings\.csv)", [&api, send](const httplib::Request& req, httplib::Response& res) {
        send(res, api.csv_rating(req.matches[1], req.body), true);
    });
}

} // namespace hitl

#endif // HITL_SERVER_HPP
