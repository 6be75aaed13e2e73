#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "singlimit/cli.hpp"
#include "singlimit/config.hpp"
#include "singlimit/io.hpp"

using namespace singlimit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("singlimit_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_cfg(const fs::path& dir, const std::string& text) {
    const auto p = dir / "run.cfg";
    std::ofstream(p) << text;
    return p;
}

struct CliResult {
    int code;
    std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "singlimit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string expect_parse_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no error for: " << text;
    return {};
}

const char* kSmallRun = "grid.xmin = -5\ngrid.xmax = 5\ngrid.dx = 0.1\n"
                        "time.dt = 0.01\ntime.t_end = 2\ntime.output_every = 50\n"
                        "init.radius = 1\nexperiment.norm_horizon = 2\n";

} // namespace

TEST(Config, EmptyTextGivesDefaults) {
    const auto c = parse_config("");
    EXPECT_EQ(c.params.fu, 1.12);
    EXPECT_EQ(c.params.du, 0.27);
    EXPECT_EQ(c.params.delta, 10.0 / 9.0);
    EXPECT_EQ(c.params.sf, 0.1);
    EXPECT_EQ(c.params.sh, 0.8);
    EXPECT_EQ(c.params.sigma, 1.0);
    EXPECT_EQ(c.diffusion.constant, 0.1);
    EXPECT_EQ(c.xmin, -15.0);
    EXPECT_EQ(c.xmax, 15.0);
    EXPECT_EQ(c.dx, 0.05);
    EXPECT_EQ(c.dt, 0.005);
    EXPECT_EQ(c.grid().nx, 601u);
    EXPECT_EQ(c.epsilons, (std::vector<double>{0.3, 0.1, 0.05, 0.02}));
}

TEST(Config, CommentsAndWhitespace) {
    const auto c = parse_config("# header\n\n  model.fu = 1.5   # trailing\r\nmodel.delta = 1.25\n");
    EXPECT_EQ(c.params.fu, 1.5);
    EXPECT_EQ(c.params.delta, 1.25);
}

TEST(Config, RatioDelta) {
    EXPECT_EQ(parse_config("model.delta = 10/9").params.delta, 10.0 / 9.0);
    EXPECT_EQ(parse_config("model.delta = 1.2").params.delta, 1.2);
    expect_parse_error("model.delta = 1/0");
}

TEST(Config, IncompatibilityAboveOneRejectedWithLine) {
    const auto msg = expect_parse_error("\n\nmodel.sh = 1.2\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.sh"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(0,1]"), std::string::npos) << msg;
}

TEST(Config, FecundityCostMustStayBelowIncompatibility) {
    const auto msg = expect_parse_error("model.sf = 0.9\n");
    EXPECT_NE(msg.find("s_f < s_h"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(Config, DuplicateAndUnknownKeysRejected) {
    const auto dup = expect_parse_error("model.fu = 1\nmodel.fu = 2\n");
    EXPECT_NE(dup.find("duplicate"), std::string::npos);
    EXPECT_NE(dup.find("line 2"), std::string::npos);
    const auto unk = expect_parse_error("model.fecundity = 1\n");
    EXPECT_NE(unk.find("unknown key"), std::string::npos);
    expect_parse_error("fu = 1\n");
    expect_parse_error("model.fu 1\n");
    expect_parse_error("model.fu = abc\n");
}

TEST(Config, CrossFieldChecks) {
    expect_parse_error("model.mu = 0.04\n");
    EXPECT_NO_THROW(parse_config("model.mu = 0.04\nmodel.variant = imperfect\nmodel.sf = 0\n"));
    expect_parse_error("experiment.epsilons = 0.1, 0.3\n");
    expect_parse_error("grid.dx = 0.07\n");
    expect_parse_error("init.amplitude = 1\n");
    expect_parse_error("init.radius = 20\n");
    expect_parse_error("diffusion.a = 0\n");
    expect_parse_error("experiment.speed_window = 100, 50\n");
}

TEST(Config, TabulatedDiffusion) {
    const auto c = parse_config("diffusion.a = -15:0.1, 0:0.3, 15:0.1\n");
    ASSERT_TRUE(c.diffusion.tabulated());
    EXPECT_NEAR(c.diffusion(-7.5), 0.2, 1e-15);
    EXPECT_EQ(c.diffusion(0.0), 0.3);
    EXPECT_EQ(c.diffusion(-20.0), 0.1);
    const auto sc = c.solver();
    EXPECT_NEAR(sc.diffusivity[300], 0.3, 1e-15);
    expect_parse_error("diffusion.a = 0:0.1, -1:0.2\n");
}

TEST(Config, ShowConfigRoundTripsAndMarksChoices) {
    const auto text = show_config(parse_config(""));
    EXPECT_NE(text.find("model.fu = 1.12\n"), std::string::npos);
    EXPECT_NE(text.find("model.du = 0.27\n"), std::string::npos);
    EXPECT_NE(text.find("model.delta = 10/9\n"), std::string::npos);
    EXPECT_NE(text.find("model.sf = 0.1\n"), std::string::npos);
    EXPECT_NE(text.find("grid.dx = 0.05\n"), std::string::npos);
    EXPECT_NE(text.find("time.dt = 0.005\n"), std::string::npos);
    EXPECT_NE(text.find("time.output_every = 5000\n"), std::string::npos);
    EXPECT_NE(text.find("diffusion.a = 0.1\n"), std::string::npos);
    EXPECT_NE(text.find("init.radius = 0.55  # choice"), std::string::npos);
    EXPECT_NE(text.find("model.epsilon = 0.1  # choice"), std::string::npos);
    const auto again = show_config(parse_config(text));
    EXPECT_EQ(text, again);
}

TEST(Config, ShippedConfigsParse) {
    const char* dir = std::getenv("SINGLIMIT_CONFIG_DIR");
    if (!dir) GTEST_SKIP() << "SINGLIMIT_CONFIG_DIR not set";
    const auto f1 = cli::load_config(std::string(dir) + "/figure1.cfg");
    EXPECT_EQ(f1.params.sf, 0.1);
    EXPECT_EQ(f1.variant, Variant::PerfectTransmission);
    const auto f2 = cli::load_config(std::string(dir) + "/figure2.cfg");
    EXPECT_EQ(f2.params.sf, 0.0);
    EXPECT_EQ(f2.params.mu, 0.04);
    EXPECT_EQ(f2.variant, Variant::ImperfectTransmission);
    EXPECT_EQ(f2.init.amplitude, 0.5);
}

TEST(Io, SnapshotRoundTripBitExact) {
    const auto dir = scratch("roundtrip");
    const auto g = Grid1D::from_spacing(-15.0, 15.0, 0.05);
    const Field f = Field::sample(g, [](double x) { return std::exp(-x * x / 3.0) / 7.0 + 1e-300; });
    io::write_snapshot(f, dir / "f.csv");
    const Field back = io::read_snapshot(dir / "f.csv");
    EXPECT_EQ(back.grid, f.grid);
    EXPECT_EQ(back.values, f.values);
    for (std::size_t i = 0; i < g.nx; ++i) EXPECT_EQ(back.grid.x(i), g.x(i));
}

TEST(Io, SnapshotFormat) {
    const auto g = Grid1D::from_points(0.0, 1.0, 3);
    const auto text = io::snapshot_csv(Field(g, 1.0));
    EXPECT_EQ(text, "x,value\n0,1\n0.5,1\n1,1\n");
    EXPECT_EQ(text.find('\r'), std::string::npos);
    EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
}

TEST(Io, ReportRows) {
    ConvergenceReport r;
    r.epsilons = {0.3, 0.1, 0.05, 0.02};
    r.err_p = {4, 3, 2, 1};
    r.err_m = {0.4, 0.3, 0.2, 0.1};
    r.speeds = {0.1, 0.2, 0.3, 0.35};
    r.limit_speed = 0.4;
    const auto text = io::report_csv(r);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "epsilon,err_p,err_m,speed,limit_speed");
    double prev = INFINITY;
    int rows = 0;
    while (std::getline(in, line)) {
        const double eps = std::stod(line.substr(0, line.find(',')));
        EXPECT_LT(eps, prev);
        prev = eps;
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}

TEST(Io, ReadErrorsCarryPath) {
    try {
        io::read_snapshot("/nonexistent/dir/x.csv");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.csv"), std::string::npos);
    }
    const auto dir = scratch("bad");
    std::ofstream(dir / "bad.csv") << "x,value\n0,1\n0.5,oops\n1,1\n";
    EXPECT_THROW(io::read_snapshot(dir / "bad.csv"), IoError);
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
    const auto dir = scratch("atomic");
    io::write_atomic(dir / "a.txt", "hello\n");
    EXPECT_EQ(io::read_file(dir / "a.txt"), "hello\n");
    EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
}

TEST(Io, SvgHasOnePolylinePerSnapshot) {
    const auto g = Grid1D::from_points(-1.0, 1.0, 21);
    std::vector<TimedField> curves{{25.0, Field(g, 0.2)}, {50.0, Field(g, 0.6)}};
    const auto svg = io::svg_plot({{curves, "blue", false, "limit"}}, "test");
    std::size_t count = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
    EXPECT_EQ(count, 2u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Cli, EquilibriaTable) {
    const auto r = run_cli({"equilibria"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string header, label, stability;
    std::getline(in, header);
    const std::vector<std::tuple<std::string, double, double, std::string>> expected{
        {"Invasion", 9.702381, 0.0, "Stable"},
        {"Extinction", 0.0, 9.758929, "Stable"},
        {"Coexistence", 2.304316, 7.398066, "Unstable"},
        {"Origin", 0.0, 0.0, "Unstable"}};
    for (const auto& [l, ni, nu, st] : expected) {
        double a = 0, b = 0;
        ASSERT_TRUE(in >> label >> a >> b >> stability);
        EXPECT_EQ(label, l);
        EXPECT_NEAR(a, ni, 1e-6);
        EXPECT_NEAR(b, nu, 1e-6);
        EXPECT_EQ(stability, st);
    }
}

TEST(Cli, CheckDefaultsPasses) {
    const auto r = run_cli({"check"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("codes");
    EXPECT_EQ(run_cli({"check", "--config", write_cfg(dir, "model.sh = 1.2\n").string()}).code, 1);
    EXPECT_EQ(run_cli({"check", "--config", write_cfg(dir, "model.delta = 6\n").string()}).code, 3);
    EXPECT_EQ(run_cli({"check", "--config", (dir / "missing.cfg").string()}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
    EXPECT_EQ(run_cli({"simulate", "--model", "bogus", "--out", dir.string()}).code, 1);
    EXPECT_EQ(run_cli({"--show-config"}).code, 0);
}

TEST(Cli, ShowConfig) {
    const auto r = run_cli({"--show-config"});
    EXPECT_EQ(r.out, show_config(parse_config("")));
}

TEST(Cli, SimulateWritesSnapshotsAndManifest) {
    const auto dir = scratch("simulate");
    const auto cfg = write_cfg(dir, kSmallRun);
    const auto r = run_cli({"simulate", "--config", cfg.string(), "--model", "system", "--out", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = io::read_manifest(dir / "out" / "manifest.csv");
    ASSERT_EQ(manifest.size(), 5u);
    EXPECT_EQ(manifest.front().time, 0.0);
    EXPECT_NEAR(manifest.back().time, 2.0, 1e-12);
    const auto series = io::read_series(dir / "out");
    EXPECT_EQ(series.front().field.size(), 101u);
    EXPECT_TRUE(fs::exists(dir / "out" / "n_00004.csv"));
}

TEST(Cli, IdenticalConfigGivesIdenticalBytes) {
    const auto dir = scratch("pure");
    const auto cfg = write_cfg(dir, kSmallRun);
    for (const char* sub : {"a", "b"})
        ASSERT_EQ(run_cli({"simulate", "--config", cfg.string(), "--model", "system", "--out", (dir / sub).string()}).code, 0);
    for (const auto& e : fs::directory_iterator(dir / "a"))
        EXPECT_EQ(io::read_file(e.path()), io::read_file(dir / "b" / e.path().filename())) << e.path();
}

TEST(Cli, AlternativeModelSimulates) {
    const auto dir = scratch("alt");
    const auto cfg = write_cfg(dir, kSmallRun);
    EXPECT_EQ(run_cli({"simulate", "--config", cfg.string(), "--model", "alt", "--out", (dir / "o").string()}).code, 0);
}

TEST(Cli, ConvergeWritesReport) {
    const auto dir = scratch("converge");
    const auto cfg = write_cfg(dir, std::string(kSmallRun) + "experiment.epsilons = 0.3, 0.1\n");
    const auto r = run_cli({"converge", "--config", cfg.string(), "--out", (dir / "o").string(), "--svg"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = io::read_file(dir / "o" / "report.csv");
    EXPECT_EQ(text.rfind("epsilon,err_p,err_m,speed,limit_speed\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_TRUE(fs::exists(dir / "o" / "profiles_0.svg"));
}

TEST(Cli, LimitSimulationThenWavespeed) {
    const auto dir = scratch("wavespeed");
    const auto cfg = write_cfg(dir, "time.output_every = 500\n");
    ASSERT_EQ(run_cli({"simulate", "--config", cfg.string(), "--model", "limit", "--out", (dir / "o").string()}).code, 0);
    const auto r = run_cli({"wavespeed", "--config", cfg.string(), "--series", (dir / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(std::stod(r.out), 0.0);
    const auto direct = run_cli({"wavespeed", "--config", cfg.string(), "--model", "limit"});
    ASSERT_EQ(direct.code, 0) << direct.err;
    EXPECT_NEAR(std::stod(direct.out), std::stod(r.out), 5e-3);
}
