#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lbpfc/adapt.hpp"
#include "lbpfc/errors.hpp"
#include "lbpfc/expression.hpp"
#include "lbpfc/mesh.hpp"
#include "lbpfc/params.hpp"
#include "lbpfc/stepper.hpp"

namespace lbpfc {

struct IntervalDomain {
    double length = 4.0 * std::numbers::pi;
    bool operator==(const IntervalDomain&) const = default;
};

struct RectangleDomain {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    bool operator==(const RectangleDomain&) const = default;
};

/// Convex polygon, counter-clockwise vertices.
struct PolygonDomain {
    std::vector<Point<2>> vertices;
    bool operator==(const PolygonDomain&) const = default;
};

using Domain = std::variant<IntervalDomain, RectangleDomain, PolygonDomain>;

inline int domain_dim(const Domain& d) { return std::holds_alternative<IntervalDomain>(d) ? 1 : 2; }

/// Uniform cell counts (interval: one, rectangle: two) or a target diameter (polygon).
struct MeshSpec {
    std::vector<int> cells;
    std::optional<double> target_h;
    bool operator==(const MeshSpec&) const = default;
};

struct ScheduleSpec {
    std::optional<double> t_end;
    std::optional<double> energy_tol;
    long max_steps = 1'000'000;
    bool operator==(const ScheduleSpec&) const = default;
};

struct SolverSpec {
    SolverKind kind = SolverKind::Direct;
    double tol = 1e-10;
    long max_iterations = 0;
    bool operator==(const SolverSpec&) const = default;
};

struct OutputSpec {
    std::string dir = "out";
    long snapshot_every = 0;  ///< 0: final snapshot only
    bool vtk = false;
    bool operator==(const OutputSpec&) const = default;
};

/// Convergence-study settings; errors are measured at t_end against a reference run.
struct StudySpec {
    double t_end = 1.0 / 64.0;
    double reference_dt = 1.0 / 65536.0;
    std::vector<double> dts{1.0 / 1024, 1.0 / 2048, 1.0 / 4096, 1.0 / 8192};
    int reference_cells = 4096;
    std::vector<int> cells{16, 32, 64, 128};
    bool operator==(const StudySpec&) const = default;
};

struct RunConfig {
    Domain domain = IntervalDomain{};
    MeshSpec mesh{{256}, std::nullopt};
    ModelParams model{};
    ScheduleSpec schedule{};
    std::optional<AdaptConfig> adapt;
    std::string initial = "0";
    OutputSpec output{};
    SolverSpec solver{};
    StudySpec study{};

    int dim() const { return domain_dim(domain); }
    bool operator==(const RunConfig&) const = default;
};

/// Builds the initial mesh described by the config.
inline Mesh<1> build_mesh_1d(const RunConfig& cfg) {
    return build_interval_mesh(std::get<IntervalDomain>(cfg.domain).length, cfg.mesh.cells.at(0));
}

inline Mesh<2> build_mesh_2d(const RunConfig& cfg) {
    if (const auto* r = std::get_if<RectangleDomain>(&cfg.domain)) {
        return build_rectangle_mesh(r->x0, r->x1, r->y0, r->y1, cfg.mesh.cells.at(0), cfg.mesh.cells.at(1));
    }
    return build_polygon_mesh(std::get<PolygonDomain>(cfg.domain).vertices, *cfg.mesh.target_h);
}

inline StepperOptions stepper_options(const RunConfig& cfg) {
    StepperOptions o;
    o.solver = cfg.solver.kind;
    o.solve.tol = cfg.solver.tol;
    o.solve.max_iterations = cfg.solver.max_iterations;
    return o;
}

namespace detail {

using Json = nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline double read_number(const Json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        try {
            return eval_constant(j.get<std::string>());
        } catch (const ParseError& e) {
            throw ConfigError(path, std::string("bad constant expression: ") + e.what());
        }
    }
    throw ConfigError(path, "expected a number or a constant expression string");
}

inline long read_integer(const Json& j, const std::string& path) {
    const double v = read_number(j, path);
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9.0e15) {
        throw ConfigError(path, "expected an integer");
    }
    return static_cast<long>(v);
}

inline bool read_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

inline std::string read_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline const Json& require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    return j;
}

template <class Handlers>
void for_each_key(const Json& j, const std::string& path, Handlers&& handle) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (!handle(key, value, join(path, key))) throw ConfigError(join(path, key), "unknown key");
    }
}

inline Json write_number(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
}

inline Point<2> read_point(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected [x, y]");
    return {read_number(j[0], path + "[0]"), read_number(j[1], path + "[1]")};
}

inline Domain read_domain(const Json& j, const std::string& path) {
    require_object(j, path);
    if (!j.contains("kind")) throw ConfigError(join(path, "kind"), "missing required key");
    const std::string kind = read_string(j.at("kind"), join(path, "kind"));
    if (kind == "interval") {
        IntervalDomain d;
        for_each_key(j, path, [&](const std::string& k, const Json& v, const std::string& p) {
            if (k == "kind") return true;
            if (k == "length") return d.length = read_number(v, p), true;
            return false;
        });
        if (!(d.length > 0.0) || !std::isfinite(d.length)) throw ConfigError(join(path, "length"), "must be positive");
        return d;
    }
    if (kind == "rectangle") {
        RectangleDomain d;
        auto pair = [&](const Json& v, const std::string& p, double& a, double& b) {
            if (!v.is_array() || v.size() != 2) throw ConfigError(p, "expected [min, max]");
            a = read_number(v[0], p + "[0]");
            b = read_number(v[1], p + "[1]");
            if (!(b > a)) throw ConfigError(p, "need min < max");
        };
        for_each_key(j, path, [&](const std::string& k, const Json& v, const std::string& p) {
            if (k == "kind") return true;
            if (k == "x") return pair(v, p, d.x0, d.x1), true;
            if (k == "y") return pair(v, p, d.y0, d.y1), true;
            return false;
        });
        return d;
    }
    if (kind == "polygon") {
        PolygonDomain d;
        for_each_key(j, path, [&](const std::string& k, const Json& v, const std::string& p) {
            if (k == "kind") return true;
            if (k == "vertices") {
                if (!v.is_array()) throw ConfigError(p, "expected an array of [x, y]");
                for (std::size_t i = 0; i < v.size(); ++i) d.vertices.push_back(read_point(v[i], p + "[" + std::to_string(i) + "]"));
                return true;
            }
            return false;
        });
        if (d.vertices.size() < 3) throw ConfigError(join(path, "vertices"), "need at least three vertices");
        return d;
    }
    if (kind == "regular_polygon" || kind == "circle") {
        long sides = kind == "circle" ? 64 : 0;
        double radius = 1.0;
        Point<2> center{0.0, 0.0};
        for_each_key(j, path, [&](const std::string& k, const Json& v, const std::string& p) {
            if (k == "kind") return true;
            if (k == "sides") return sides = read_integer(v, p), true;
            if (k == "radius") return radius = read_number(v, p), true;
            if (k == "center") return center = read_point(v, p), true;
            return false;
        });
        if (sides < 3) throw ConfigError(join(path, "sides"), "need at least three sides");
        if (!(radius > 0.0)) throw ConfigError(join(path, "radius"), "must be positive");
        return PolygonDomain{regular_polygon(static_cast<int>(sides), radius, center)};
    }
    throw ConfigError(join(path, "kind"), "unknown domain kind '" + kind + "'");
}

inline Json write_domain(const Domain& d) {
    if (const auto* i = std::get_if<IntervalDomain>(&d)) return {{"kind", "interval"}, {"length", i->length}};
    if (const auto* r = std::get_if<RectangleDomain>(&d)) {
        return {{"kind", "rectangle"}, {"x", {r->x0, r->x1}}, {"y", {r->y0, r->y1}}};
    }
    Json v = Json::array();
    for (const auto& p : std::get<PolygonDomain>(d).vertices) v.push_back({p[0], p[1]});
    return {{"kind", "polygon"}, {"vertices", v}};
}

inline Flow read_flow(const Json& j, const std::string& path) {
    const std::string s = read_string(j, path);
    if (s == "allen_cahn") return Flow::AllenCahn;
    if (s == "cahn_hilliard") return Flow::CahnHilliard;
    throw ConfigError(path, "expected \"allen_cahn\" or \"cahn_hilliard\"");
}

inline Estimator read_estimator(const Json& j, const std::string& path) {
    const std::string s = read_string(j, path);
    if (s == "gradient_norm") return Estimator::GradientNorm;
    if (s == "recovery_h1") return Estimator::RecoveryH1;
    throw ConfigError(path, "expected \"gradient_norm\" or \"recovery_h1\"");
}

inline void apply_document(RunConfig& cfg, const Json& doc) {
    for_each_key(doc, "", [&](const std::string& key, const Json& v, const std::string& path) {
        if (key == "preset") return true;
        if (key == "domain") return cfg.domain = read_domain(v, path), true;
        if (key == "initial") {
            cfg.initial = read_string(v, path);
            return true;
        }
        if (key == "mesh") {
            cfg.mesh = {};
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                if (k == "cells") {
                    if (x.is_array()) {
                        for (std::size_t i = 0; i < x.size(); ++i) {
                            cfg.mesh.cells.push_back(static_cast<int>(read_integer(x[i], p + "[" + std::to_string(i) + "]")));
                        }
                    } else {
                        cfg.mesh.cells.push_back(static_cast<int>(read_integer(x, p)));
                    }
                    return true;
                }
                if (k == "target_h") return cfg.mesh.target_h = read_number(x, p), true;
                return false;
            });
            return true;
        }
        if (key == "model") {
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                auto& m = cfg.model;
                if (k == "xi") return m.xi = read_number(x, p), true;
                if (k == "alpha") return m.alpha = read_number(x, p), true;
                if (k == "gamma") return m.gamma = read_number(x, p), true;
                if (k == "d0") return m.d0 = read_number(x, p), true;
                if (k == "dt") return m.dt = read_number(x, p), true;
                if (k == "flow") return m.flow = read_flow(x, p), true;
                return false;
            });
            return true;
        }
        if (key == "schedule") {
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                auto& s = cfg.schedule;
                if (k == "t_end") return s.t_end = x.is_null() ? std::nullopt : std::optional(read_number(x, p)), true;
                if (k == "energy_tol") {
                    return s.energy_tol = x.is_null() ? std::nullopt : std::optional(read_number(x, p)), true;
                }
                if (k == "max_steps") return s.max_steps = read_integer(x, p), true;
                return false;
            });
            return true;
        }
        if (key == "adapt") {
            if (v.is_null()) {
                cfg.adapt.reset();
                return true;
            }
            AdaptConfig a = cfg.adapt.value_or(AdaptConfig{});
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                if (k == "epsilon_e") return a.epsilon_e = read_number(x, p), true;
                if (k == "epsilon_sigma") return a.epsilon_sigma = read_number(x, p), true;
                if (k == "theta_r") return a.theta_r = read_number(x, p), true;
                if (k == "theta_c") return a.theta_c = read_number(x, p), true;
                if (k == "estimator") return a.estimator = read_estimator(x, p), true;
                if (k == "max_steps") return a.max_steps = read_integer(x, p), true;
                return false;
            });
            cfg.adapt = a;
            return true;
        }
        if (key == "output") {
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                auto& o = cfg.output;
                if (k == "dir") return o.dir = read_string(x, p), true;
                if (k == "snapshot_every") return o.snapshot_every = read_integer(x, p), true;
                if (k == "vtk") return o.vtk = read_bool(x, p), true;
                return false;
            });
            return true;
        }
        if (key == "solver") {
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                auto& s = cfg.solver;
                if (k == "kind") {
                    const std::string n = read_string(x, p);
                    if (n == "direct") {
                        s.kind = SolverKind::Direct;
                    } else if (n == "iterative") {
                        s.kind = SolverKind::Iterative;
                    } else {
                        throw ConfigError(p, "expected \"direct\" or \"iterative\"");
                    }
                    return true;
                }
                if (k == "tol") return s.tol = read_number(x, p), true;
                if (k == "max_iterations") return s.max_iterations = read_integer(x, p), true;
                return false;
            });
            return true;
        }
        if (key == "study") {
            for_each_key(v, path, [&](const std::string& k, const Json& x, const std::string& p) {
                auto& s = cfg.study;
                if (k == "t_end") return s.t_end = read_number(x, p), true;
                if (k == "reference_dt") return s.reference_dt = read_number(x, p), true;
                if (k == "reference_cells") return s.reference_cells = static_cast<int>(read_integer(x, p)), true;
                if (k == "dts" || k == "cells") {
                    if (!x.is_array()) throw ConfigError(p, "expected an array");
                    if (k == "dts") s.dts.clear();
                    if (k == "cells") s.cells.clear();
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        const std::string pi = p + "[" + std::to_string(i) + "]";
                        if (k == "dts") {
                            s.dts.push_back(read_number(x[i], pi));
                        } else {
                            s.cells.push_back(static_cast<int>(read_integer(x[i], pi)));
                        }
                    }
                    return true;
                }
                return false;
            });
            return true;
        }
        return false;
    });
}

}  // namespace detail

/// Checks cross-field constraints; throws ConfigError naming the offending key.
inline void validate_config(const RunConfig& cfg) {
    try {
        cfg.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    if (cfg.adapt) {
        try {
            cfg.adapt->validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("adapt", e.what());
        }
    }
    if (cfg.dim() == 1) {
        if (cfg.mesh.cells.size() != 1 || cfg.mesh.cells[0] < 1) {
            throw ConfigError("mesh.cells", "an interval needs one positive cell count");
        }
    } else if (std::holds_alternative<RectangleDomain>(cfg.domain)) {
        if (cfg.mesh.cells.size() != 2 || cfg.mesh.cells[0] < 1 || cfg.mesh.cells[1] < 1) {
            throw ConfigError("mesh.cells", "a rectangle needs two positive cell counts [nx, ny]");
        }
    } else if (!cfg.mesh.target_h || !(*cfg.mesh.target_h > 0.0)) {
        throw ConfigError("mesh.target_h", "a polygon needs a positive target_h");
    }
    const auto& s = cfg.schedule;
    if (!cfg.adapt && !s.t_end && !s.energy_tol) {
        throw ConfigError("schedule", "need t_end or energy_tol");
    }
    if (s.t_end && !(*s.t_end >= 0.0)) throw ConfigError("schedule.t_end", "must be non-negative");
    if (s.energy_tol && !(*s.energy_tol > 0.0)) throw ConfigError("schedule.energy_tol", "must be positive");
    if (s.max_steps < 0) throw ConfigError("schedule.max_steps", "must be non-negative");
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
    if (cfg.solver.max_iterations < 0) throw ConfigError("solver.max_iterations", "must be non-negative");
    if (cfg.output.snapshot_every < 0) throw ConfigError("output.snapshot_every", "must be non-negative");
    try {
        parse_expression(cfg.initial);
    } catch (const ParseError& e) {
        throw ConfigError("initial", e.what());
    }
    const auto& st = cfg.study;
    if (!(st.t_end > 0.0) || !(st.reference_dt > 0.0)) throw ConfigError("study", "t_end and reference_dt must be positive");
    for (double dt : st.dts) {
        if (!(dt > 0.0)) throw ConfigError("study.dts", "time steps must be positive");
    }
    for (int n : st.cells) {
        if (n < 1) throw ConfigError("study.cells", "cell counts must be positive");
    }
}

inline std::optional<RunConfig> preset(const std::string& name);

/// Parses a JSON document. A "preset" key selects the starting config; other
/// keys override it ("domain" and "mesh" are replaced as a whole).
inline RunConfig parse_config(const std::string& text) {
    detail::Json doc;
    try {
        doc = detail::Json::parse(text);
    } catch (const detail::Json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    if (doc.is_null()) doc = detail::Json::object();
    if (!doc.is_object()) throw ConfigError("", "top level must be an object");
    RunConfig cfg;
    if (doc.contains("preset")) {
        const std::string name = detail::read_string(doc["preset"], "preset");
        auto base = preset(name);
        if (!base) throw ConfigError("preset", "unknown preset '" + name + "'");
        cfg = *base;
    } else {
        for (const char* key : {"domain", "initial"}) {
            if (!doc.contains(key)) throw ConfigError(key, "missing required key");
        }
    }
    detail::apply_document(cfg, doc);
    validate_config(cfg);
    return cfg;
}

/// Canonical JSON rendering; parse_config(render_config(c)) == c.
inline std::string render_config(const RunConfig& cfg) {
    using detail::Json;
    using detail::write_number;
    Json j;
    j["domain"] = detail::write_domain(cfg.domain);
    Json mesh = Json::object();
    if (!cfg.mesh.cells.empty()) mesh["cells"] = cfg.mesh.cells;
    if (cfg.mesh.target_h) mesh["target_h"] = *cfg.mesh.target_h;
    j["mesh"] = mesh;
    j["model"] = {{"xi", cfg.model.xi}, {"alpha", cfg.model.alpha}, {"gamma", cfg.model.gamma},
                  {"d0", cfg.model.d0}, {"dt", cfg.model.dt}, {"flow", to_string(cfg.model.flow)}};
    Json sched = {{"max_steps", cfg.schedule.max_steps}};
    sched["t_end"] = cfg.schedule.t_end ? write_number(*cfg.schedule.t_end) : Json();
    sched["energy_tol"] = cfg.schedule.energy_tol ? write_number(*cfg.schedule.energy_tol) : Json();
    j["schedule"] = sched;
    if (cfg.adapt) {
        const auto& a = *cfg.adapt;
        j["adapt"] = {{"epsilon_e", write_number(a.epsilon_e)},
                      {"epsilon_sigma", write_number(a.epsilon_sigma)},
                      {"theta_r", a.theta_r},
                      {"theta_c", a.theta_c},
                      {"estimator", to_string(a.estimator)},
                      {"max_steps", a.max_steps}};
    } else {
        j["adapt"] = nullptr;
    }
    j["initial"] = cfg.initial;
    j["output"] = {{"dir", cfg.output.dir}, {"snapshot_every", cfg.output.snapshot_every}, {"vtk", cfg.output.vtk}};
    j["solver"] = {{"kind", cfg.solver.kind == SolverKind::Direct ? "direct" : "iterative"},
                   {"tol", cfg.solver.tol},
                   {"max_iterations", cfg.solver.max_iterations}};
    j["study"] = {{"t_end", cfg.study.t_end},
                  {"reference_dt", cfg.study.reference_dt},
                  {"dts", cfg.study.dts},
                  {"reference_cells", cfg.study.reference_cells},
                  {"cells", cfg.study.cells}};
    return j.dump(2);
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{
        "fig1", "table1", "table2",
        "fig2-triangle-lamellar", "fig2-hexagon-lamellar", "fig2-circle-lamellar",
        "fig2-triangle-hex", "fig2-hexagon-hex", "fig2-circle-hex",
        "fig3", "fig4", "fig5", "fig6"};
    return names;
}

inline std::optional<RunConfig> preset(const std::string& name) {
    constexpr double pi = std::numbers::pi;
    RunConfig c;
    c.output.dir = "out/" + name;
    if (name == "fig1" || name == "table1" || name == "table2") {
        c.domain = IntervalDomain{4.0 * pi};
        c.mesh = {{256}, std::nullopt};
        c.initial = "exp(x/(4*pi))";
        if (name == "fig1") {
            c.model.d0 = 16.0;
            c.model.dt = 1.0 / 16.0;
            c.schedule.energy_tol = 1e-6;
        } else {
            c.model.d0 = 25.0;
            c.schedule.t_end = 1.0 / 64.0;
            c.model.dt = name == "table1" ? 1.0 / 1024.0 : 1.0 / 4096.0;
            if (name == "table2") c.mesh = {{16}, std::nullopt};
        }
        return c;
    }
    if (name.rfind("fig2-", 0) == 0) {
        const auto dash = name.find('-', 5);
        if (dash == std::string::npos) return std::nullopt;
        const std::string shape = name.substr(5, dash - 5), phase = name.substr(dash + 1);
        int sides;
        double target_h;
        if (shape == "triangle") {
            sides = 3;
            target_h = 0.4;
        } else if (shape == "hexagon") {
            sides = 6;
            target_h = 0.4;
        } else if (shape == "circle") {
            sides = 64;
            target_h = 0.8;
        } else {
            return std::nullopt;
        }
        if (phase == "lamellar") {
            c.model.gamma = 0.2;
            c.initial = "cos(x)";
        } else if (phase == "hex") {
            c.model.gamma = 0.8;
            c.initial = "hexcos()";
        } else {
            return std::nullopt;
        }
        c.domain = PolygonDomain{regular_polygon(sides, 2.0 * pi)};
        c.mesh = {{}, target_h};
        c.model.d0 = 500.0;
        c.model.dt = 1e-2;
        c.schedule.energy_tol = 1e-4;
        return c;
    }
    c.model.dt = 1e-2;
    c.model.d0 = 500.0;
    c.adapt = AdaptConfig{};
    if (name == "fig3") {
        c.domain = RectangleDomain{0.0, pi, 0.0, pi};
        c.mesh = {{16, 16}, std::nullopt};
        c.initial = "cos(x)";
        c.adapt->epsilon_e = 1e-6;
    } else if (name == "fig4") {
        c.domain = RectangleDomain{-2.0 * pi, 2.0 * pi, -2.0 * pi, 2.0 * pi};
        c.mesh = {{32, 32}, std::nullopt};
        c.model.gamma = 0.6;
        c.initial = "cos(x)+cos(y)";
        c.adapt->epsilon_e = 1e-4;
    } else if (name == "fig5") {
        const double hy = 4.0 * pi / std::sqrt(3.0);
        c.domain = RectangleDomain{-2.0 * pi, 2.0 * pi, -hy, hy};
        c.mesh = {{32, 36}, std::nullopt};
        c.model.gamma = 0.8;
        c.initial = "hexcos()";
        c.adapt->epsilon_e = 1e-4;
    } else if (name == "fig6") {
        c.domain = RectangleDomain{0.0, 6.0 * pi, 0.0, 6.0 * pi};
        c.mesh = {{48, 48}, std::nullopt};
        c.model.d0 = 5000.0;
        c.initial = "piecewise((x < 2*pi, 6*sin(x+pi/2)), (x > 4*pi, hexcos()), 0)";
        c.adapt->epsilon_e = 1e-3;
    } else {
        return std::nullopt;
    }
    return c;
}

}  // namespace lbpfc
