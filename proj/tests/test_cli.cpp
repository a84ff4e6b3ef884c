#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pulsetls/cli.hpp"

using namespace pulsetls;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args)
{
    const std::string cmd = std::string(PULSETLS_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p)
        return r;
    char buf[4096];
    while (const auto n = fread(buf, 1, sizeof buf, p))
        r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() /
              ("pulsetls_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string out() const { return "--out-dir " + dir.string(); }

    fs::path dir;
};

}  // namespace

TEST(Config, JsonRoundTripIsExact)
{
    for (const auto& name : cli::preset_names()) {
        auto c = cli::preset_config(name);
        c.dark_decay_ns = name == "fig2" ? std::optional<double>(662.0) : std::nullopt;
        c.delta0_mhz = 0.1 + 0.2;
        const auto j = cli::to_json(c);
        const auto back = cli::from_json(cli::json::parse(j.dump()));
        EXPECT_EQ(back, c) << name;
        EXPECT_EQ(cli::to_json(back).dump(), j.dump()) << name;
    }
}

TEST(Config, OverlayKeepsBase)
{
    const auto base = cli::preset_config("fig2");
    const auto c = cli::from_json(cli::json::parse(R"({"ensemble": {"seed": 9}})"), base);
    auto expect = base;
    expect.seed = 9;
    EXPECT_EQ(c, expect);
}

TEST(Config, RejectsUnknownKeysAndBadTypes)
{
    EXPECT_THROW(cli::from_json(cli::json::parse(R"({"pulse": {}})")), ConfigError);
    EXPECT_THROW(cli::from_json(cli::json::parse(R"({"pulses": {"tau": 5}})")), ConfigError);
    EXPECT_THROW(cli::from_json(cli::json::parse(R"({"windows": [{"name": "a", "stop_ns": 1}]})")), ConfigError);
    EXPECT_THROW(cli::from_json(cli::json::parse(R"({"pulses": {"n_pulses": "many"}})")), ConfigError);
    EXPECT_THROW(cli::from_json(cli::json::parse(R"([1, 2])")), ConfigError);
    EXPECT_THROW(cli::preset_config("fig9"), ConfigError);
}

TEST(Config, ResolveValidates)
{
    auto c = cli::preset_config("fig1c");
    EXPECT_NO_THROW(cli::resolve(c));
    c.mode = "exact";
    EXPECT_THROW(cli::resolve(c), ConfigError);
    c = cli::preset_config("fig1c");
    c.tau_ns = 2.0;
    EXPECT_THROW(cli::resolve(c), ConfigError);
    c = cli::preset_config("fig1c");
    c.theta_step_ns = 1.0;
    EXPECT_THROW(cli::resolve(c), ConfigError);
    c = cli::preset_config("fig2");
    c.windows[0].label = "sideways";
    EXPECT_THROW(cli::resolve(c), ConfigError);
}

TEST(Config, PresetGeometry)
{
    const auto f2 = cli::resolve(cli::preset_config("fig2"));
    EXPECT_EQ(f2.seq.n_pulses, 21);
    ASSERT_EQ(f2.windows.size(), 2u);
    EXPECT_NEAR(f2.windows[0].start, f2.seq.center(10) + 0.5 * f2.seq.interpulse_delay, 1e-18);
    EXPECT_NEAR(f2.windows[0].end, f2.seq.center(20), 1e-18);
    EXPECT_NEAR(f2.windows[1].start - f2.seq.center(20), 60e-9, 1e-18);
    EXPECT_NEAR(f2.probe.turn_on_time, f2.windows[0].start, 1e-18);
    EXPECT_NEAR(f2.probe.rabi_amplitude, 0.02 * f2.params.decay_rate, 1.0);

    const auto f5 = cli::resolve(cli::preset_config("fig5"));
    ASSERT_EQ(f5.windows.size(), 4u);
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(f5.windows[k].start, f5.seq.center(0), 1e-18);
        EXPECT_NEAR(f5.windows[k].end, f5.seq.center(k + 1), 1e-18);
    }

    const auto f1 = cli::resolve(cli::preset_config("fig1c"));
    EXPECT_EQ(f1.freqs.size(), 401u);
    EXPECT_NEAR(f1.freqs.back(), 1.5 / 5e-9, 1.0);
}

TEST(Format, NineSignificantDigits)
{
    EXPECT_EQ(cli::format_number(0.1 + 0.2), "0.3");
    EXPECT_EQ(cli::format_number(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(cli::format_number(-1.25e-7), "-1.25e-07");
    EXPECT_EQ(cli::format_number(NAN), "nan");
    cli::CsvWriter w({"a", "b"});
    w.row({1.0, 2.5});
    EXPECT_EQ(w.str(), "a,b\n1,2.5\n");
    EXPECT_THROW(w.row({1.0}), ConfigError);
}

TEST(Calibrate, SweepPeaksAtCalibratedAmplitude)
{
    const auto cal = cli::calibrate(1.6, 1.0);
    EXPECT_NEAR(cal.peak_amplitude, 1.8496e9, 1e5);
    EXPECT_NEAR(cal.truncation_factor, 1.0 / std::erf(3.0 / std::sqrt(2.0)), 1e-12);
    EXPECT_TRUE(cal.fit.converged);
    EXPECT_NEAR(cal.fit.params[1] / cal.peak_amplitude, 1.0, 1e-3);
    const auto half = cli::calibrate(1.6, 0.5);
    EXPECT_NEAR(half.peak_amplitude, 0.5 * cal.peak_amplitude, 1.0);
    EXPECT_NEAR(half.fit.params[1] / cal.peak_amplitude, 1.0, 1e-3);
}

TEST_F(Cli, EmitConfigReloads)
{
    const auto r = run("spectrum --preset fig5 --seed 77 --emit-config");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto path = dir / "c.json";
    std::ofstream(path) << r.out;
    const auto again = run("spectrum --config " + path.string() + " --emit-config");
    ASSERT_EQ(again.code, 0) << again.out;
    EXPECT_EQ(again.out, r.out);
    EXPECT_EQ(cli::load_config(path.string()).seed, 77u);
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("nonsense").code, 2);
    EXPECT_EQ(run("spectrum --preset nope").code, 2);
    EXPECT_EQ(run("spectrum --config /nonexistent/c.json").code, 2);
    std::ofstream(dir / "bad.json") << R"({"ensemble": {"fwhm": 30}})";
    const auto bad = run("spectrum --config " + (dir / "bad.json").string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("ensemble.fwhm"), std::string::npos) << bad.out;
    EXPECT_EQ(run("spectrum --tau-ns 1").code, 2);
    EXPECT_EQ(run("sweep --preset fig1c --axis width --values 1").code, 2);
    EXPECT_EQ(run("fit " + (dir / "missing.csv").string()).code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, LifetimeSpectrumAndFit)
{
    const auto r = run("spectrum --preset lifetime --svg " + out());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto csv = dir / "lifetime_spectrum.csv";
    ASSERT_TRUE(fs::exists(csv));
    EXPECT_TRUE(fs::exists(dir / "lifetime_spectrum.svg"));
    const auto data = cli::read_csv(csv.string());
    EXPECT_EQ(data.header, (std::vector<std::string>{"freq_mhz", "p1", "p2", "q", "q_stderr"}));
    EXPECT_EQ(data.columns[0].size(), 241u);

    const auto f = run("fit " + csv.string() + " --y-col p1 --out " + (dir / "fit").string());
    ASSERT_EQ(f.code, 0) << f.out;
    const auto report = cli::json::parse(slurp(dir / "fit.json"));
    EXPECT_TRUE(report["converged"].get<bool>());
    EXPECT_NEAR(report["linewidths"][0]["fwhm_mhz"].get<double>(), 1e3 / (2.0 * std::numbers::pi * 12.3), 0.26);
    EXPECT_EQ(slurp(dir / "fit.txt"), f.out);
}

TEST_F(Cli, FitSyntheticSatellites)
{
    const double tau = 10e-9;
    const auto spec = ModelSpec::lorentzian_sum(7);
    std::vector<double> p;
    for (int n = -3; n <= 3; ++n)
        p.insert(p.end(), {n == 0 ? -0.5 : 0.2 / (1 + std::abs(n)), n * 50.0 + 0.3 * n, 12.0});
    p.push_back(1.0);
    const auto x = linspace(-200.0, 200.0, 401);
    const auto y = eval_model(spec, p, x);
    cli::CsvWriter w({"freq_mhz", "signal"});
    for (std::size_t i = 0; i < x.size(); ++i)
        w.row({x[i], y[i]});
    cli::write_file((dir / "sat.csv").string(), w.str());
    const auto r = run("fit " + (dir / "sat.csv").string() + " --tau-ns 10 --out " + (dir / "sat").string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = cli::json::parse(slurp(dir / "sat.json"));
    ASSERT_EQ(report["satellites"].size(), 6u);
    for (const auto& s : report["satellites"]) {
        const int n = s["order"].get<int>();
        EXPECT_NEAR(s["center_mhz"].get<double>(), n * 50.3, 1e-4);
        EXPECT_NEAR(s["predicted_mhz"].get<double>(), n / (2.0 * tau) / 1e6, 1e-9);
    }
}

TEST_F(Cli, FitNonConvergenceExitsFour)
{
    cli::CsvWriter w({"t", "y"});
    for (int i = 0; i < 40; ++i)
        w.row({static_cast<double>(i), std::sin(1.7 * i) + 0.05 * i});
    cli::write_file((dir / "noise.csv").string(), w.str());
    const auto r = run("fit " + (dir / "noise.csv").string() + " --model bi_exponential --init 1,1e-9,1,1e9,0");
    EXPECT_EQ(r.code, 4) << r.out;
    EXPECT_NE(r.out.find("converged: no"), std::string::npos);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput)
{
    const std::string common = "spectrum --preset fig1c --realizations 6 --points 41 " + out();
    ASSERT_EQ(run(common + " --threads 1 --prefix one").code, 0);
    ASSERT_EQ(run(common + " --threads 3 --prefix three").code, 0);
    const auto a = slurp(dir / "one_spectrum.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "three_spectrum.csv"));
    ASSERT_EQ(run(common + " --threads 1 --seed 2 --prefix other").code, 0);
    EXPECT_NE(a, slurp(dir / "other_spectrum.csv"));
}

TEST_F(Cli, SweepWritesSummary)
{
    const auto r = run("sweep --preset fig1c --realizations 4 --points 61 --axis tau --values 5,10 " + out());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "fig1c_tau_5_spectrum.csv"));
    EXPECT_TRUE(fs::exists(dir / "fig1c_tau_10_spectrum.csv"));
    const auto s = cli::read_csv((dir / "fig1c_tau_summary.csv").string());
    EXPECT_EQ(s.header.front(), "value");
    EXPECT_EQ(s.columns[0], (std::vector<double>{5.0, 10.0}));
    EXPECT_EQ(slurp(dir / "fig1c_tau_summary.csv"), r.out);
}

TEST_F(Cli, TraceWritesWindowsAndTrace)
{
    const auto r = run("trace --preset fig5 --realizations 3 " + out());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto t = cli::read_csv((dir / "fig5_trace.csv").string());
    EXPECT_EQ(t.header, (std::vector<std::string>{"time_ns", "signal"}));
    for (int k = 1; k <= 4; ++k) {
        const auto c = cli::read_csv((dir / ("fig5_pulses_" + std::to_string(k) + ".csv")).string());
        EXPECT_EQ(c.header, (std::vector<std::string>{"freq_mhz", "signal", "change", "change_stderr"}));
        EXPECT_EQ(c.columns[0].size(), 121u);
    }
}
