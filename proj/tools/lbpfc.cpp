#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lbpfc/lbpfc.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kSolver = 3 };

lbpfc::RunConfig load(const std::string& path, const std::string& preset_name) {
    if (path.empty()) {
        if (preset_name.empty()) throw lbpfc::ConfigError("", "give a config file or --preset");
        nlohmann::json doc{{"preset", preset_name}};
        return lbpfc::parse_config(doc.dump());
    }
    std::ifstream in(path);
    if (!in) throw lbpfc::ConfigError("", "cannot read '" + path + "'");
    std::stringstream text;
    text << in.rdbuf();
    if (preset_name.empty()) return lbpfc::parse_config(text.str());
    auto doc = nlohmann::json::parse(text.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw lbpfc::ConfigError("", "malformed JSON in '" + path + "'");
    doc["preset"] = preset_name;
    return lbpfc::parse_config(doc.dump());
}

void print_study(const nlohmann::json& summary) {
    for (const auto& row : summary["rows"]) std::cout << row.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-element SAV solver for the Landau-Brazovskii model"};
    app.require_subcommand(1);
    std::string out_dir, preset_name;
    long snapshot_every = -1;
    int threads = 1;
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--snapshot-every", snapshot_every, "write a field snapshot every N steps");
    app.add_option("--threads", threads, "worker threads for study sub-runs")->check(CLI::PositiveNumber);
    app.add_option("--preset", preset_name, "start from a named preset")
        ->check(CLI::IsMember(lbpfc::preset_names()));

    std::string config_path, mode;
    auto* run = app.add_subcommand("run", "fixed-mesh run");
    run->add_option("config", config_path, "JSON config");
    auto* adapt = app.add_subcommand("adapt", "adaptive run");
    adapt->add_option("config", config_path, "JSON config");
    auto* study = app.add_subcommand("study", "convergence study");
    study->add_option("mode", mode, "time or space")->required()->check(CLI::IsMember({"time", "space"}));
    study->add_option("config", config_path, "JSON config");
    app.add_subcommand("presets", "list preset names");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("presets")) {
        for (const auto& n : lbpfc::preset_names()) std::cout << n << "\n";
        return kOk;
    }
    try {
        lbpfc::RunConfig cfg = load(config_path, preset_name);
        lbpfc::ExperimentOptions opt;
        if (!out_dir.empty()) opt.out_dir = out_dir;
        if (snapshot_every >= 0) opt.snapshot_every = snapshot_every;
        opt.threads = threads;
        opt.log = &std::cerr;

        lbpfc::ExperimentResult res;
        if (run->parsed()) {
            if (cfg.adapt && !cfg.schedule.t_end && !cfg.schedule.energy_tol) {
                cfg.schedule.energy_tol = cfg.adapt->epsilon_e;
            }
            cfg.adapt.reset();
            res = lbpfc::run_experiment(cfg, opt);
        } else if (adapt->parsed()) {
            if (!cfg.adapt) {
                cfg.adapt = lbpfc::AdaptConfig{};
                if (cfg.schedule.energy_tol) cfg.adapt->epsilon_e = *cfg.schedule.energy_tol;
            }
            res = lbpfc::run_experiment(cfg, opt);
        } else {
            res = lbpfc::run_study(cfg, mode == "time" ? lbpfc::StudyMode::Time : lbpfc::StudyMode::Space, opt);
            print_study(res.summary);
        }
        std::cout << res.summary.dump() << "\n";
        std::cerr << "wall time " << res.wall_seconds << " s\n";
        return kOk;
    } catch (const lbpfc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const lbpfc::SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolver;
    } catch (const lbpfc::SingularSystem& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolver;
    } catch (const lbpfc::ModelViolation& e) {
        std::cerr << "model violation: " << e.what() << "\n";
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
