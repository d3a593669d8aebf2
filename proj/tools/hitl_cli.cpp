// Command-line entry points: simulated campaigns, the session server, log
// analysis and front export.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hitl/analysis.hpp"
#include "hitl/campaign.hpp"
#include "hitl/design_space.hpp"
#include "hitl/objectives.hpp"
#include "hitl/protocol.hpp"
#include "hitl/server.hpp"
#include "hitl/session.hpp"

namespace fs = std::filesystem;

namespace {

hitl::Point parse_ref_point(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    if (v.size() == 1) v.assign(hitl::kNumObjectives, v[0]);
    if (v.size() != hitl::kNumObjectives)
        throw hitl::ConfigError("--ref-point needs 1 or " + std::to_string(hitl::kNumObjectives) + " values");
    return v;
}

hitl::EngineConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw hitl::Error("cannot read config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw hitl::ConfigError(path + ": " + e.what());
    }
    return hitl::engine_config_from_json(j);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw hitl::Error("cannot write " + path.string());
    f << text;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Human-in-the-loop multi-objective Bayesian optimization of visualization designs"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON file with acquisition/gp/stopping settings");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run campaigns against synthetic users");
    std::string sim_condition = "C4", sim_archetype = "mixed", sim_out = "sim_out", sim_ref = "-1.1";
    int sim_users = 20, sim_workers = 1;
    std::uint64_t sim_seed = 1;
    double sim_noise = 0.0, sim_custom_sd = 0.1;
    bool sim_rounding = false;
    sim->add_option("--condition", sim_condition, "C1..C6")->capture_default_str();
    sim->add_option("--users", sim_users, "Number of synthetic users")->capture_default_str();
    sim->add_option("--seed", sim_seed, "Master seed")->capture_default_str();
    sim->add_option("--archetype", sim_archetype, "minimalist, maximalist or mixed")->capture_default_str();
    sim->add_option("--noise", sim_noise, "Rating noise SD in raw item units")->capture_default_str();
    sim->add_option("--custom-sd", sim_custom_sd, "Spread of C3/C6 custom designs around the ideal")->capture_default_str();
    sim->add_flag("--likert", sim_rounding, "Round synthetic ratings to the answer grid");
    sim->add_option("--out", sim_out, "Output directory")->capture_default_str();
    sim->add_option("--ref-point", sim_ref, "Hypervolume reference point")->capture_default_str();
    sim->add_option("--workers", sim_workers, "Parallel sessions")->capture_default_str();

    // analyze
    auto* ana = app.add_subcommand("analyze", "Convergence tables from session logs");
    std::vector<std::string> ana_logs;
    std::string ana_out = "analysis_out", ana_ref = "-1.1";
    ana->add_option("logs", ana_logs, "Log files or directories")->required();
    ana->add_option("--out", ana_out, "Output directory")->capture_default_str();
    ana->add_option("--ref-point", ana_ref, "Hypervolume reference point")->capture_default_str();

    // serve
    auto* srv = app.add_subcommand("serve", "Serve live sessions over HTTP");
    int port = 8080;
    std::string host = "0.0.0.0", log_dir, static_dir;
    srv->add_option("--port", port, "TCP port")->capture_default_str();
    srv->add_option("--host", host, "Bind address")->capture_default_str();
    srv->add_option("--log-dir", log_dir, "Session log directory (default: $HITL_LOG_DIR or ./sessions)");
    srv->add_option("--static-dir", static_dir, "Optional directory served at / (rating console build)");

    // export-front
    auto* exp = app.add_subcommand("export-front", "Write a session's Pareto front as CSV");
    std::string exp_log, exp_out;
    exp->add_option("log", exp_log, "Session log (.jsonl)")->required();
    exp->add_option("--out", exp_out, "Output CSV (default: stdout)");

    // csv-session
    auto* csvs = app.add_subcommand("csv-session", "Run one session over stdin/stdout CSV lines");
    std::string csv_condition = "C4", csv_seed_design, csv_log;
    std::uint64_t csv_seed = 1;
    csvs->add_option("--condition", csv_condition, "C1..C6")->capture_default_str();
    csvs->add_option("--seed", csv_seed, "Session seed")->capture_default_str();
    csvs->add_option("--seed-design", csv_seed_design, "Seed design as a 16-field CSV line (C3/C6)");
    csvs->add_option("--log", csv_log, "Append the session's JSONL log here");

    // catalog
    auto* cat = app.add_subcommand("schema", "Print the design-space and objective schema as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        const hitl::EngineConfig config = load_config(config_path);

        if (*sim) {
            hitl::SimulationOptions opt;
            opt.condition = hitl::condition_from_string(sim_condition);
            opt.users = sim_users;
            opt.seed = sim_seed;
            opt.archetype = hitl::archetype_from_string(sim_archetype);
            opt.population.noise_sd = sim_noise;
            opt.population.likert_rounding = sim_rounding;
            opt.custom_jitter_sd = sim_custom_sd;
            opt.config = config;
            opt.reference_point = parse_ref_point(sim_ref);
            opt.workers = sim_workers;
            const auto rep = hitl::simulate(opt);
            hitl::write_simulation(rep, opt.condition, sim_out);
            int wins = 0, stopped = 0;
            for (const auto& r : rep.rows) {
                wins += r.final_hypervolume >= r.baseline_hypervolume ? 1 : 0;
                stopped += r.stopped_early ? 1 : 0;
            }
            std::cout << "sessions: " << rep.rows.size() << "  beat random search: " << wins
                      << "  stopped early: " << stopped << "\nwrote " << (fs::path(sim_out) / "summary.csv").string()
                      << '\n';
        } else if (*ana) {
            std::vector<fs::path> inputs(ana_logs.begin(), ana_logs.end());
            std::vector<hitl::SessionLog> logs;
            for (const auto& p : hitl::collect_logs(inputs)) logs.push_back(hitl::load_session_log(p));
            const auto res = hitl::analyze(logs, parse_ref_point(ana_ref));
            if (res.mixed_conditions)
                std::cerr << "warning: logs span " << res.conditions.size()
                          << " conditions; writing separate tables per condition\n";
            fs::create_directories(ana_out);
            for (const auto& ca : res.conditions) {
                write_file(fs::path(ana_out) / ("convergence_" + ca.condition + ".csv"), hitl::convergence_csv(ca));
                write_file(fs::path(ana_out) / ("hypervolume_" + ca.condition + ".csv"), hitl::hypervolume_csv(ca));
                write_file(fs::path(ana_out) / ("front_parameters_" + ca.condition + ".csv"),
                           hitl::front_parameters_csv(ca));
                std::cout << ca.condition << ": " << ca.sessions.size() << " sessions, " << ca.stopped_early.size()
                          << " stopped early (series padded with last value)\n";
            }
        } else if (*srv) {
            if (log_dir.empty()) {
                const char* env = std::getenv("HITL_LOG_DIR");
                log_dir = env && *env ? env : "sessions";
            }
            hitl::SessionRegistry registry({log_dir, config, {}});
            const auto restored = registry.recover();
            hitl::Api api(registry);
            httplib::Server server;
            hitl::install_routes(server, api);
            if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
                throw hitl::Error("static directory not found: " + static_dir);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            if (!server.bind_to_port(host, port)) throw hitl::Error("cannot bind " + host + ":" + std::to_string(port));
            std::cerr << "serving on " << host << ':' << port << " (logs: " << log_dir << ", restored " << restored
                      << " sessions)\n";
            server.listen_after_bind();
        } else if (*exp) {
            const auto csv = hitl::export_front_csv(hitl::load_session_log(exp_log));
            if (exp_out.empty()) std::cout << csv;
            else write_file(exp_out, csv);
        } else if (*csvs) {
            const auto cid = hitl::condition_from_string(csv_condition);
            std::optional<hitl::DesignPoint> seed_design;
            if (!csv_seed_design.empty()) seed_design = hitl::csv_parse_design(csv_seed_design);
            std::unique_ptr<hitl::JsonlWriter> log;
            if (!csv_log.empty()) log = std::make_unique<hitl::JsonlWriter>(csv_log);
            hitl::SessionOptions so;
            so.config = config;
            if (log) so.sink = [&log](const nlohmann::json& e) { log->append(e); };
            auto [session, design] = hitl::Session::start(hitl::make_condition(cid, seed_design), csv_seed, so);
            std::cout << hitl::csv_emit_design(design) << std::flush;
            std::string line;
            while (std::getline(std::cin, line)) {
                if (line.empty() || line[0] == '#') continue;
                try {
                    const auto res = session.submit_rating(hitl::csv_parse_ratings(line));
                    if (res.next) {
                        std::cout << hitl::csv_emit_design(*res.next) << std::flush;
                        continue;
                    }
                    std::cout << "# " << hitl::to_string(session.phase()) << '\n' << std::flush;
                    break;
                } catch (const hitl::ParseError& e) {
                    std::cout << "# error field " << e.field() << ": " << e.what() << '\n' << std::flush;
                }
            }
        } else if (*cat) {
            std::cout << nlohmann::json{{"design_space", hitl::catalog_json()},
                                        {"objectives", hitl::objective_schema_json()}}
                             .dump(2)
                      << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
