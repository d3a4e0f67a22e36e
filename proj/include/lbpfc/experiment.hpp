#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "lbpfc/adapt.hpp"
#include "lbpfc/config.hpp"
#include "lbpfc/io.hpp"
#include "lbpfc/stepper.hpp"
#include "lbpfc/study.hpp"

namespace lbpfc {

/// Command-line overrides of the config's output section.
struct ExperimentOptions {
    std::optional<std::string> out_dir;
    std::optional<long> snapshot_every;
    int threads = 1;
    std::ostream* log = nullptr;  ///< progress and warnings; null for silence
};

struct ExperimentResult {
    nlohmann::json summary;
    double wall_seconds = 0.0;
};

namespace detail {

class SnapshotWriter {
public:
    SnapshotWriter(std::filesystem::path dir, long every, bool vtk) : dir_(std::move(dir)), every_(every), vtk_(vtk) {}

    template <int Dim>
    void maybe(const Mesh<Dim>& mesh, const SavState& state, bool force = false) {
        if (!force && (every_ <= 0 || state.step_index % every_ != 0)) return;
        if (state.step_index == last_) return;
        last_ = state.step_index;
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%06ld", state.step_index);
        auto f = open_out((dir_ / (std::string(name) + ".txt")).string());
        write_snapshot(f, mesh, state);
        if (vtk_) {
            auto v = open_out((dir_ / (std::string(name) + ".vtk")).string());
            write_vtk(v, mesh, state);
        }
    }

private:
    std::filesystem::path dir_;
    long every_;
    bool vtk_;
    long last_ = -1;
};

template <int Dim>
Mesh<Dim> initial_mesh(const RunConfig& cfg) {
    try {
        if constexpr (Dim == 1) {
            return build_mesh_1d(cfg);
        } else {
            return build_mesh_2d(cfg);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError("domain", e.what());
    }
}

template <int Dim>
auto initial_function(const Expression& u0) {
    return [u0](const Point<Dim>& p) { return u0(p[0], Dim > 1 ? p[Dim - 1] : 0.0); };
}

template <int Dim>
nlohmann::json run_dim(const RunConfig& cfg, const std::filesystem::path& dir, long snapshot_every,
                       std::ostream* log) {
    const Expression u0 = parse_expression(cfg.initial);
    const Mesh<Dim> mesh0 = initial_mesh<Dim>(cfg);
    SnapshotWriter snaps(dir, snapshot_every, cfg.output.vtk);
    nlohmann::json s;
    s["dim"] = Dim;
    s["flow"] = to_string(cfg.model.flow);

    const double radicand =
        integrate_bulk_energy(mesh0, interpolate(mesh0, initial_function<Dim>(u0)), cfg.model) + cfg.model.d0;
    s["initial_radicand"] = radicand;
    if (radicand < 1.0 && log) *log << "warning: E1(phi0) + D0 = " << radicand << " is below 1\n";

    if (cfg.adapt) {
        auto observer = [&](const Mesh<Dim>& m, const SavState& st, const EnergyReport&) {
            snaps.maybe(m, st, st.step_index == 0);
        };
        auto r = adapt_run(mesh0, initial_function<Dim>(u0), cfg.model, *cfg.adapt, stepper_options(cfg), observer);
        snaps.maybe(r.final_mesh, r.final_state, true);
        auto e = open_out((dir / "energy.csv").string());
        write_energy_csv(e, r.trace);
        auto a = open_out((dir / "adapt.csv").string());
        write_adapt_csv(a, r.events);
        double max_jump = 0.0;
        for (const auto& ev : r.events) max_jump = std::max(max_jump, std::abs(ev.s_gap_jump));
        s["steps"] = r.final_state.step_index;
        s["final_time"] = r.final_state.time;
        s["final_modified_energy"] = r.trace.back().modified_energy;
        s["final_original_energy"] = r.trace.back().original_energy;
        s["converged"] = r.converged;
        s["adapt_events"] = r.events.size();
        s["max_s_gap_jump"] = max_jump;
        s["nodes"] = r.final_mesh.num_nodes();
        s["elements"] = r.final_mesh.num_elements();
        return s;
    }

    const SavSystem<Dim> sys(mesh0, cfg.model, stepper_options(cfg));
    SavState state = init_state(sys, initial_function<Dim>(u0));
    Schedule sched{cfg.schedule.t_end, cfg.schedule.energy_tol, cfg.schedule.max_steps};
    auto r = run(sys, std::move(state), sched,
                 [&](const SavState& st, const EnergyReport&) { snaps.maybe(sys.mesh(), st, st.step_index == 0); });
    snaps.maybe(sys.mesh(), r.final_state, true);
    auto e = open_out((dir / "energy.csv").string());
    write_energy_csv(e, r.trace);
    s["steps"] = r.final_state.step_index;
    s["final_time"] = r.final_state.time;
    s["final_modified_energy"] = r.trace.back().modified_energy;
    s["final_original_energy"] = r.trace.back().original_energy;
    s["converged"] = r.energy_converged;
    s["nodes"] = sys.mesh().num_nodes();
    s["elements"] = sys.mesh().num_elements();
    return s;
}

inline std::filesystem::path prepare_dir(const RunConfig& cfg, const ExperimentOptions& opt) {
    std::filesystem::path dir = opt.out_dir.value_or(cfg.output.dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline ExperimentResult finish(const std::filesystem::path& dir, nlohmann::json summary,
                               std::chrono::steady_clock::time_point t0) {
    ExperimentResult res;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.summary = std::move(summary);
    auto f = open_out((dir / "summary.json").string());
    f << res.summary.dump(2) << "\n";
    auto t = open_out((dir / "timing.json").string());
    t << nlohmann::json{{"wall_seconds", res.wall_seconds}}.dump(2) << "\n";
    return res;
}

}  // namespace detail

/// Runs a config (fixed-mesh or adaptive) and writes energy.csv, snapshots,
/// adapt.csv (adaptive runs), summary.json and timing.json to the output directory.
inline ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& opt = {}) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = detail::prepare_dir(cfg, opt);
    {
        auto c = detail::open_out((dir / "config.json").string());
        c << render_config(cfg) << "\n";
    }
    const long every = opt.snapshot_every.value_or(cfg.output.snapshot_every);
    nlohmann::json s = cfg.dim() == 1 ? detail::run_dim<1>(cfg, dir, every, opt.log)
                                      : detail::run_dim<2>(cfg, dir, every, opt.log);
    return detail::finish(dir, std::move(s), t0);
}

enum class StudyMode { Time, Space };

/// Convergence study; writes study_time.csv or study_space.csv.
inline ExperimentResult run_study(const RunConfig& cfg, StudyMode mode, const ExperimentOptions& opt = {}) {
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = detail::prepare_dir(cfg, opt);
    std::vector<StudyRow> rows;
    if (mode == StudyMode::Space) {
        rows = space_study(cfg, opt.threads);
    } else if (cfg.dim() == 1) {
        rows = time_study<1>(cfg, opt.threads);
    } else {
        rows = time_study<2>(cfg, opt.threads);
    }
    const char* param = mode == StudyMode::Time ? "dt" : "h";
    auto f = detail::open_out((dir / (mode == StudyMode::Time ? "study_time.csv" : "study_space.csv")).string());
    write_study_csv(f, rows, param);
    nlohmann::json s;
    s["mode"] = mode == StudyMode::Time ? "time" : "space";
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows) {
        auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
        table.push_back({{param, r.parameter}, {"e_phi", r.e_phi}, {"rate_phi", num(r.rate_phi)},
                         {"e_psi", r.e_psi}, {"rate_psi", num(r.rate_psi)}, {"e_s", r.e_s}, {"rate_s", num(r.rate_s)}});
    }
    s["rows"] = table;
    return detail::finish(dir, std::move(s), t0);
}

}  // namespace lbpfc
