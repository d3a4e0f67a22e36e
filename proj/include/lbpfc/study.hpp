#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>

#include "lbpfc/config.hpp"
#include "lbpfc/expression.hpp"
#include "lbpfc/io.hpp"
#include "lbpfc/stepper.hpp"

namespace lbpfc {

/// Runs job(0..n-1) on up to `threads` worker threads; the first exception is rethrown.
inline void parallel_for(int n, int threads, const std::function<void(int)>& job) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n && !failed; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct StudyRow {
    double parameter = 0.0;  ///< dt (time study) or h (space study)
    double e_phi = 0.0, e_psi = 0.0, e_s = 0.0;
    double rate_phi = std::numeric_limits<double>::quiet_NaN();
    double rate_psi = std::numeric_limits<double>::quiet_NaN();
    double rate_s = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline long steps_for(double t_end, double dt) {
    const double n = t_end / dt;
    const long r = std::lround(n);
    if (std::abs(n - static_cast<double>(r)) > 1e-9 * std::max(1.0, n)) {
        throw ConfigError("study", "t_end must be an integer multiple of every time step");
    }
    return r;
}

template <int Dim>
SavState run_to(const SavSystem<Dim>& sys, const Expression& u0, long steps) {
    SavState s = init_state(sys, [&](const Point<Dim>& p) { return u0(p[0], Dim > 1 ? p[Dim - 1] : 0.0); });
    for (long n = 0; n < steps; ++n) s = sys.step(s);
    return s;
}

inline void fill_rates(std::vector<StudyRow>& rows) {
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double r = std::log(rows[k - 1].parameter / rows[k].parameter);
        rows[k].rate_phi = std::log(rows[k - 1].e_phi / rows[k].e_phi) / r;
        rows[k].rate_psi = std::log(rows[k - 1].e_psi / rows[k].e_psi) / r;
        rows[k].rate_s = std::log(rows[k - 1].e_s / rows[k].e_s) / r;
    }
}

template <int Dim>
Mesh<Dim> study_mesh(const RunConfig& cfg) {
    if constexpr (Dim == 1) {
        return build_mesh_1d(cfg);
    } else {
        return build_mesh_2d(cfg);
    }
}

}  // namespace detail

/// Temporal errors at study.t_end against a run with study.reference_dt on the same mesh.
template <int Dim>
std::vector<StudyRow> time_study(const RunConfig& cfg, int threads = 1) {
    const auto& st = cfg.study;
    const Expression u0 = parse_expression(cfg.initial);
    const Mesh<Dim> mesh = detail::study_mesh<Dim>(cfg);
    std::vector<double> dts{st.reference_dt};
    dts.insert(dts.end(), st.dts.begin(), st.dts.end());
    std::vector<SavState> finals(dts.size());
    std::vector<std::unique_ptr<SavSystem<Dim>>> systems(dts.size());
    parallel_for(static_cast<int>(dts.size()), threads, [&](int i) {
        ModelParams p = cfg.model;
        p.dt = dts[i];
        systems[i] = std::make_unique<SavSystem<Dim>>(mesh, p, stepper_options(cfg));
        finals[i] = detail::run_to(*systems[i], u0, detail::steps_for(st.t_end, dts[i]));
    });
    const SparseMatrix& mass = systems[0]->mass();
    std::vector<StudyRow> rows;
    for (std::size_t i = 1; i < dts.size(); ++i) {
        StudyRow r;
        r.parameter = dts[i];
        r.e_phi = l2_norm(mass, finals[i].phi.coeffs - finals[0].phi.coeffs);
        r.e_psi = l2_norm(mass, finals[i].psi.coeffs - finals[0].psi.coeffs);
        r.e_s = std::abs(finals[i].s - finals[0].s);
        rows.push_back(r);
    }
    detail::fill_rates(rows);
    return rows;
}

/// Spatial errors at study.t_end on intervals with study.cells cells, against
/// study.reference_cells cells; the reference is interpolated onto each mesh.
inline std::vector<StudyRow> space_study(const RunConfig& cfg, int threads = 1) {
    const auto* dom = std::get_if<IntervalDomain>(&cfg.domain);
    if (!dom) throw ConfigError("domain", "the space study needs an interval domain");
    const auto& st = cfg.study;
    const Expression u0 = parse_expression(cfg.initial);
    std::vector<int> cells{st.reference_cells};
    cells.insert(cells.end(), st.cells.begin(), st.cells.end());
    const long steps = detail::steps_for(st.t_end, cfg.model.dt);
    std::vector<SavState> finals(cells.size());
    std::vector<std::unique_ptr<SavSystem<1>>> systems(cells.size());
    parallel_for(static_cast<int>(cells.size()), threads, [&](int i) {
        systems[i] = std::make_unique<SavSystem<1>>(build_interval_mesh(dom->length, cells[i]), cfg.model,
                                                    stepper_options(cfg));
        finals[i] = detail::run_to(*systems[i], u0, steps);
    });
    const PointLocator<1> ref(systems[0]->mesh());
    std::vector<StudyRow> rows;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const auto& sys = *systems[i];
        Vector rphi(sys.mesh().num_nodes()), rpsi(sys.mesh().num_nodes());
        for (Index k = 0; k < sys.mesh().num_nodes(); ++k) {
            rphi[k] = ref.evaluate(finals[0].phi.coeffs, sys.mesh().node(k));
            rpsi[k] = ref.evaluate(finals[0].psi.coeffs, sys.mesh().node(k));
        }
        StudyRow r;
        r.parameter = sys.mesh().h();
        r.e_phi = l2_norm(sys.mass(), finals[i].phi.coeffs - rphi);
        r.e_psi = l2_norm(sys.mass(), finals[i].psi.coeffs - rpsi);
        r.e_s = std::abs(finals[i].s - finals[0].s);
        rows.push_back(r);
    }
    detail::fill_rates(rows);
    return rows;
}

inline void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows, const char* parameter) {
    os << parameter << ",e_phi,rate_phi,e_psi,rate_psi,e_s,rate_s\n";
    for (const auto& r : rows) {
        os << detail::format_double(r.parameter) << "," << detail::format_double(r.e_phi) << ","
           << detail::format_double(r.rate_phi) << "," << detail::format_double(r.e_psi) << ","
           << detail::format_double(r.rate_psi) << "," << detail::format_double(r.e_s) << ","
           << detail::format_double(r.rate_s) << "\n";
    }
}

}  // namespace lbpfc
