#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"

using namespace lbpfc;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lbpfc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string config_key_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<accepted>";
}

}  // namespace

TEST(Expression, SpecExamples) {
    EXPECT_EQ(parse_expression("exp(x/(4*pi))")(0.0), 1.0);
    EXPECT_EQ(parse_expression("cos(x)+cos(y)")(0.0, 0.0), 2.0);
    EXPECT_NEAR(parse_expression("hexcos()")(0.0, 0.0), 6.0, 1e-14);
}

TEST(Expression, Precedence) {
    EXPECT_EQ(parse_expression("1+2*3")(0), 7.0);
    EXPECT_EQ(parse_expression("2^3^2")(0), 512.0);
    EXPECT_EQ(parse_expression("-2^2")(0), -4.0);
    EXPECT_EQ(parse_expression("2^-1")(0), 0.5);
    EXPECT_EQ(parse_expression("8/4/2")(0), 1.0);
    EXPECT_EQ(parse_expression("7-2-1")(0), 4.0);
    EXPECT_EQ(parse_expression("(1+2)*3")(0), 9.0);
    EXPECT_EQ(parse_expression(" x * y ")(3, 4), 12.0);
}

TEST(Expression, Piecewise) {
    const auto e = parse_expression("piecewise((x < 1, 10), (x >= 3, y), -1)");
    EXPECT_EQ(e(0.5, 7), 10.0);
    EXPECT_EQ(e(2.0, 7), -1.0);
    EXPECT_EQ(e(3.0, 7), 7.0);
    EXPECT_EQ(parse_expression("piecewise((x > 0, 1), (2))")(-1), 2.0);
}

TEST(Expression, ErrorsCarryPosition) {
    auto pos = [](const char* s) -> long {
        try {
            parse_expression(s);
        } catch (const ParseError& e) {
            return static_cast<long>(e.position());
        }
        return -1;
    };
    EXPECT_EQ(pos("1 + foo(x)"), 4);
    EXPECT_EQ(pos("2 * )"), 4);
    EXPECT_EQ(pos("(1 + 2"), 6);
    EXPECT_EQ(pos("1 2"), 2);
    EXPECT_GE(pos(""), 0);
    EXPECT_GE(pos("piecewise(3)"), 0);
}

TEST(Expression, ConstantEvaluation) {
    EXPECT_EQ(eval_constant("2^-4"), 0.0625);
    EXPECT_EQ(eval_constant("4*pi"), 4.0 * pi);
    EXPECT_THROW(eval_constant("x+1"), ParseError);
}

TEST(Expression, PresetInitialsMatchClosures) {
    struct Case {
        std::string name;
        std::function<double(double, double)> f;
    };
    const std::vector<Case> cases{
        {"fig1", [](double x, double) { return std::exp(x / (4 * pi)); }},
        {"fig2-triangle-lamellar", [](double x, double) { return std::cos(x); }},
        {"fig2-circle-hex",
         [](double x, double y) {
             double s = 0;
             for (int j = 0; j < 6; ++j) s += std::cos(std::cos(j * pi / 3) * x + std::sin(j * pi / 3) * y);
             return s;
         }},
        {"fig4", [](double x, double y) { return std::cos(x) + std::cos(y); }},
        {"fig6",
         [](double x, double y) {
             if (x < 2 * pi) return 6 * std::sin(x + pi / 2);
             if (x > 4 * pi) return hexcos(x, y);
             return 0.0;
         }},
    };
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2 * pi, 8 * pi);
    for (const auto& c : cases) {
        const auto e = parse_expression(preset(c.name)->initial);
        for (int i = 0; i < 1000; ++i) {
            const double x = u(rng), y = u(rng);
            const double want = c.f(x, y);
            ASSERT_NEAR(e(x, y), want, 1e-14 * std::max(1.0, std::abs(want))) << c.name;
        }
    }
}

TEST(Config, MinimalIntervalDocumentIsFig1) {
    RunConfig cfg = parse_config(R"json({
        "domain": {"kind": "interval", "length": "4*pi"},
        "mesh": {"cells": 256},
        "model": {"alpha": -1, "gamma": 0.2, "d0": 16, "dt": "2^-4"},
        "initial": "exp(x/(4*pi))",
        "schedule": {"energy_tol": 1e-6}
    })json");
    cfg.output.dir = preset("fig1")->output.dir;
    EXPECT_TRUE(cfg == *preset("fig1"));
}

TEST(Config, Defaults) {
    const RunConfig cfg = parse_config(R"({"domain": {"kind": "interval"}, "initial": "0", "schedule": {"t_end": 1}})");
    EXPECT_EQ(cfg.model.dt, 1e-2);
    EXPECT_EQ(cfg.model.xi, 1.0);
    EXPECT_EQ(cfg.solver.tol, 1e-10);
    EXPECT_EQ(cfg.solver.kind, SolverKind::Direct);
}

TEST(Config, RejectsThetaOrder) {
    const auto key = config_key_of(R"({"preset": "fig3", "adapt": {"theta_c": 0.95, "theta_r": 0.9}})");
    EXPECT_EQ(key, "adapt");
    try {
        parse_config(R"({"preset": "fig3", "adapt": {"theta_c": 0.95}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("theta_c"), std::string::npos);
    }
}

TEST(Config, EmptyDocumentNamesMissingKey) {
    EXPECT_EQ(config_key_of("{}"), "domain");
    EXPECT_EQ(config_key_of(R"({"domain": {"kind": "interval"}})"), "initial");
}

TEST(Config, DiagnosticsCarryKeyPath) {
    EXPECT_EQ(config_key_of(R"({"preset": "fig1", "model": {"gama": 1}})"), "model.gama");
    EXPECT_EQ(config_key_of(R"({"preset": "fig1", "model": {"dt": true}})"), "model.dt");
    EXPECT_EQ(config_key_of(R"({"preset": "fig1", "model": {"flow": "heat"}})"), "model.flow");
    EXPECT_EQ(config_key_of(R"({"preset": "fig1", "mesh": {"cells": 2.5}})"), "mesh.cells");
    EXPECT_EQ(config_key_of(R"json({"preset": "fig1", "initial": "sin(x"})json"), "initial");
    EXPECT_EQ(config_key_of(R"({"preset": "nope"})"), "preset");
    EXPECT_EQ(config_key_of(R"({"preset": "fig1", "model": {"dt": -1}})"), "model");
    EXPECT_EQ(config_key_of(R"({"preset": "fig4", "domain": {"kind": "rectangle", "x": [1, 0], "y": [0, 1]}})"),
              "domain.x");
    EXPECT_EQ(config_key_of("[1, 2]"), "");
    EXPECT_EQ(config_key_of("{"), "");
}

TEST(Config, RoundTripsEveryPreset) {
    for (const auto& name : preset_names()) {
        const auto cfg = preset(name);
        ASSERT_TRUE(cfg.has_value()) << name;
        EXPECT_NO_THROW(validate_config(*cfg)) << name;
        EXPECT_TRUE(parse_config(render_config(*cfg)) == *cfg) << name;
    }
    RunConfig inf = *preset("fig3");
    inf.adapt->epsilon_sigma = std::numeric_limits<double>::infinity();
    EXPECT_TRUE(parse_config(render_config(inf)) == inf);
}

TEST(Config, PresetOverrides) {
    const auto cfg = parse_config(R"({"preset": "fig4", "model": {"flow": "cahn_hilliard"}, "adapt": null,
                                       "schedule": {"t_end": 0.5}})");
    EXPECT_EQ(cfg.model.flow, Flow::CahnHilliard);
    EXPECT_EQ(cfg.model.gamma, 0.6);
    EXPECT_FALSE(cfg.adapt.has_value());
}

#ifdef LBPFC_CONFIG_DIR
TEST(Config, SampleFilesParse) {
    std::map<std::string, RunConfig> parsed;
    for (const auto& entry : fs::directory_iterator(LBPFC_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const std::string name = entry.path().stem().string();
        EXPECT_NO_THROW(parsed[name] = parse_config(slurp(entry.path()))) << name;
    }
    ASSERT_TRUE(parsed.count("fig1"));
    RunConfig fig1 = parsed["fig1"];
    fig1.output.snapshot_every = 0;
    EXPECT_TRUE(fig1 == *preset("fig1"));
    ASSERT_TRUE(parsed.count("fig4_adaptive"));
    RunConfig fig4 = parsed["fig4_adaptive"];
    fig4.output = preset("fig4")->output;
    EXPECT_TRUE(fig4 == *preset("fig4"));
    ASSERT_TRUE(parsed.count("table1_time_study"));
    EXPECT_TRUE(parsed["table1_time_study"].study == preset("table1")->study);
}
#endif

TEST(MeshIo, RoundTripIsBitExact) {
    const auto m = refine(build_polygon_mesh(regular_polygon(5, pi), 0.9), std::vector<Index>{0, 3});
    std::stringstream ss;
    write_mesh(ss, m);
    const auto back = read_mesh<2>(ss);
    ASSERT_EQ(back.num_nodes(), m.num_nodes());
    ASSERT_EQ(back.num_elements(), m.num_elements());
    for (Index i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(back.node(i), m.node(i));
    for (Index e = 0; e < m.num_elements(); ++e) EXPECT_EQ(back.element(e), m.element(e));
    std::stringstream again;
    write_mesh(again, back);
    EXPECT_EQ(again.str(), ss.str());
}

TEST(MeshIo, RejectsWrongDimensionAndTruncation) {
    std::stringstream a;
    write_mesh(a, build_interval_mesh(1.0, 3));
    EXPECT_THROW(read_mesh<2>(a), std::runtime_error);
    std::stringstream b("MESH dim=1 nodes=3 elements=2\n0\n0.5\n");
    EXPECT_THROW(read_mesh<1>(b), std::runtime_error);
}

TEST(SnapshotIo, FieldsRoundTripBitExact) {
    const SavSystem<1> sys(build_interval_mesh(4 * pi, 32), [] {
        ModelParams p;
        p.flow = Flow::CahnHilliard;
        return p;
    }());
    auto st = sys.step(init_state(sys, [](const Point<1>& x) { return std::sin(x[0] / 3) + 0.1; }));
    std::stringstream ss;
    write_snapshot(ss, sys.mesh(), st);
    const auto mesh = read_mesh<1>(ss);
    EXPECT_EQ(mesh.num_nodes(), 33);
    const auto f = read_fields(ss);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f.at("phi"), st.phi.coeffs);
    EXPECT_EQ(f.at("psi"), st.psi.coeffs);
    EXPECT_EQ(f.at("varphi"), st.varphi->coeffs);
}

TEST(CsvIo, Headers) {
    std::stringstream e, a;
    write_energy_csv(e, {EnergyReport{0.5, 1.0, 2.0, 3.0, 4.0}});
    EXPECT_EQ(e.str(), "step,time,original_energy,modified_energy,e1,s\n0,0.5,1,2,3,4\n");
    write_adapt_csv(a, {});
    EXPECT_EQ(a.str(), "step,time,n_elements,sigma,refined,coarsened,modified_energy\n");
}

TEST(Vtk, Layout) {
    const auto m = build_rectangle_mesh(0, 1, 0, 1, 1, 1);
    const SavSystem<2> sys(m, ModelParams{});
    std::stringstream ss;
    write_vtk(ss, m, init_state(sys, [](const Point<2>& p) { return p[0]; }));
    const std::string s = ss.str();
    EXPECT_NE(s.find("POINTS 4 double"), std::string::npos);
    EXPECT_NE(s.find("CELLS 2 8"), std::string::npos);
    EXPECT_NE(s.find("SCALARS phi double 1"), std::string::npos);
    EXPECT_EQ(s.find("varphi"), std::string::npos);
}

TEST(Experiment, RepeatedRunsWriteIdenticalFiles) {
    RunConfig cfg = *preset("fig3");
    cfg.mesh.cells = {6, 6};
    cfg.adapt->max_steps = 40;
    cfg.output.snapshot_every = 10;
    cfg.output.vtk = true;
    const auto a = scratch("det_a"), b = scratch("det_b");
    ExperimentOptions o;
    o.out_dir = a.string();
    run_experiment(cfg, o);
    o.out_dir = b.string();
    run_experiment(cfg, o);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a)) names.push_back(entry.path().filename().string());
    EXPECT_GT(names.size(), 6u);
    for (const auto& n : names) {
        if (n == "timing.json") continue;
        EXPECT_EQ(slurp(a / n), slurp(b / n)) << n;
    }
    EXPECT_TRUE(fs::exists(a / "adapt.csv"));
    EXPECT_TRUE(fs::exists(a / "energy.csv"));
    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    EXPECT_EQ(summary["steps"], 40);
    EXPECT_FALSE(summary.contains("wall_seconds"));
    EXPECT_TRUE(nlohmann::json::parse(slurp(a / "timing.json")).contains("wall_seconds"));
}

TEST(Experiment, StudyThreadCountDoesNotChangeResults) {
    RunConfig cfg = *preset("table1");
    cfg.mesh.cells = {32};
    cfg.study = {1.0 / 64, 1.0 / 2048, {1.0 / 128, 1.0 / 256, 1.0 / 512}, 256, {8, 16}};
    const auto d1 = scratch("study1"), d3 = scratch("study3");
    ExperimentOptions o;
    o.out_dir = d1.string();
    const auto one = run_study(cfg, StudyMode::Time, o);
    o.out_dir = d3.string();
    o.threads = 3;
    const auto three = run_study(cfg, StudyMode::Time, o);
    EXPECT_EQ(one.summary.dump(), three.summary.dump());
    EXPECT_EQ(slurp(d1 / "study_time.csv"), slurp(d3 / "study_time.csv"));
    EXPECT_EQ(one.summary["rows"].size(), 3u);
}

TEST(Experiment, StudyRejectsIncommensurateHorizon) {
    RunConfig cfg = *preset("table1");
    cfg.study.dts = {0.003};
    EXPECT_THROW(run_study(cfg, StudyMode::Time, {scratch("bad").string()}), ConfigError);
}

#ifdef LBPFC_CLI_PATH
namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(LBPFC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = scratch("cfg_" + name) / "config.json";
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("presets"), 0);
    EXPECT_EQ(cli("run " + write_config("bad", R"({"preset": "fig1", "model": {"bogus": 1}})").string()), 2);
    EXPECT_EQ(cli("run /nonexistent/config.json"), 2);
    EXPECT_EQ(cli("run " +
                  write_config("neg", R"({"domain": {"kind": "interval"}, "initial": "0", "model": {"d0": -1},
                                          "schedule": {"t_end": 1}})")
                      .string() +
                  " --out " + scratch("neg_out").string()),
              3);
    const auto out = scratch("ok_out");
    EXPECT_EQ(cli("run " +
                  write_config("ok", R"({"preset": "fig1", "mesh": {"cells": 32}, "schedule": {"max_steps": 5}})")
                      .string() +
                  " --out " + out.string() + " --snapshot-every 2"),
              0);
    EXPECT_TRUE(fs::exists(out / "summary.json"));
    EXPECT_TRUE(fs::exists(out / "snapshot_000004.txt"));
    EXPECT_TRUE(fs::exists(out / "snapshot_000005.txt"));
}
#endif
