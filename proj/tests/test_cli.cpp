#include "app.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace nlceqa;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nlceqa");
    std::vector<const char *> argv;
    for(const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("nlceqa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    [[nodiscard]] std::string at(const std::string &name) const { return (dir / name).string(); }

    fs::path dir;
};

} // namespace

TEST(Config, DefaultsAndOverrides) {
    ExperimentConfig c;
    EXPECT_EQ(c.model, ModelKind::chain);
    EXPECT_EQ(c.n_max, 5);
    EXPECT_FALSE(c.correction_enabled());
    apply_override(c, "model=chain_lf");
    apply_override(c, "hl=0.1");
    EXPECT_TRUE(c.correction_enabled());
    apply_override(c, "lf_correction=off");
    EXPECT_FALSE(c.correction_enabled());
    apply_override(c, "grid.scales=[0.5, 2]");
    EXPECT_EQ(c.grid_scales, (std::vector<double>{0.5, 2.0}));
    apply_override(c, "sweep.steps=3,6");
    EXPECT_EQ(c.sweep_steps, (std::vector<int>{3, 6}));
    EXPECT_THROW(apply_override(c, "nonsense=1"), ConfigError);
    EXPECT_THROW(apply_override(c, "J"), ConfigError);
    EXPECT_THROW(apply_override(c, "n_max=five"), ConfigError);
    EXPECT_THROW(apply_override(c, "model=square"), ConfigError);
}

TEST(Config, TextRoundTripWithSectionsAndComments) {
    ExperimentConfig c;
    apply_config_text(c, "# experiment\nmodel = ladder\nn_max = 6\nJ = 0.25 # coupling\n[noise]\nscale = 2\n[vqe]\nrestarts = 4\nparam_file = \"a#b.json\"\n");
    EXPECT_EQ(c.model, ModelKind::ladder);
    EXPECT_EQ(c.n_max, 6);
    EXPECT_EQ(c.J, 0.25);
    EXPECT_EQ(c.noise_scale, 2.0);
    EXPECT_EQ(c.vqe_restarts, 4);
    EXPECT_EQ(c.vqe_param_file, "a#b.json");
    ExperimentConfig back;
    apply_config_text(back, config_text(c));
    EXPECT_EQ(config_text(back), config_text(c));
    EXPECT_THROW(apply_config_text(c, "no equals sign\n"), ConfigError);
}

TEST(Config, ValidationRejectsInconsistentModels) {
    ExperimentConfig c;
    c.hl = 0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    c.model = ModelKind::chain_lf;
    EXPECT_NO_THROW(c.validate());
    ExperimentConfig l;
    l.model = ModelKind::ladder;
    l.n_max = 5;
    EXPECT_THROW(l.validate(), ConfigError);
    ExperimentConfig n;
    n.noise_scale = 200;
    EXPECT_THROW(n.validate(), std::invalid_argument);
}

TEST_F(Cli, RequiresASubcommandAndReportsErrors) {
    EXPECT_NE(cli({}).code, 0);
    const auto r = cli({"dispersion", "--set", "bogus=1", "--out", at("x")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
    EXPECT_NE(cli({"dispersion", "--config", at("missing.cfg")}).code, 0);
}

TEST_F(Cli, DispersionWritesArtifactsAndIsReproducible) {
    const std::vector<std::string> base{"dispersion", "--set", "solver=ed", "--set", "backend=shots", "--set", "n_max=4",
                                        "--set", "shots=500", "--set", "mc_samples=200", "--set", "k_points=21",
                                        "--seed", "5"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", at("a")});
    b.insert(b.end(), {"--out", at("b"), "--jobs", "2"});
    const auto ra = cli(a), rb = cli(b);
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    for(const char *f : {"config.txt", "provenance.json", "records.jsonl", "curve.csv", "curve_ed.csv", "curve_analytic.csv",
                         "plot_recipe.txt", "matrices/1x4_H.json"})
        EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
    for(const char *f : {"curve.csv", "records.jsonl"}) EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
    const auto curve = read_curve(dir / "a" / "curve.csv");
    EXPECT_EQ(curve.k.size(), 21u);
    EXPECT_GT(curve.sigma[0][3], 0.0);
    const auto recs = parse_jsonl(read_file(dir / "a" / "records.jsonl"));
    ASSERT_FALSE(recs.empty());
    EXPECT_EQ(recs.front().shots > 0, true);
    // a different seed changes the sampled curve
    auto c = base;
    c.back() = "6";
    c.insert(c.end(), {"--out", at("c")});
    ASSERT_EQ(cli(c).code, 0);
    EXPECT_NE(read_file(dir / "a" / "curve.csv"), read_file(dir / "c" / "curve.csv"));
}

TEST_F(Cli, ExactBackendMatchesEdReference) {
    const auto r = cli({"dispersion", "--set", "solver=ed", "--set", "n_max=4", "--set", "k_points=11", "--out", at("r")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto curve = read_curve(dir / "r" / "curve.csv"), ed = read_curve(dir / "r" / "curve_ed.csv");
    EXPECT_LT(mean_abs_difference(curve, ed), 1e-10);
    const auto s = cli({"summary", at("r"), "--out", at("sum")});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_TRUE(fs::exists(dir / "sum" / "summary.csv"));
    EXPECT_NE(s.out.find("chain"), std::string::npos);
    EXPECT_NE(cli({"summary", at("nowhere")}).code, 0);
}

TEST_F(Cli, NoiseGridSweepAndMcConvergence) {
    const auto g = cli({"noise-grid", "--set", "solver=ed", "--set", "n_max=3", "--set", "k_points=11", "--set",
                        "mc_samples=50", "--set", "grid.shots=300", "--set", "grid.scales=0,1", "--set", "grid.seeds=1,2",
                        "--jobs", "2", "--out", at("g")});
    ASSERT_EQ(g.code, 0) << g.err;
    const auto t = parse_csv(read_file(dir / "g" / "grid.csv"));
    EXPECT_EQ(t.rows.size(), 4u);
    EXPECT_TRUE(fs::exists(dir / "g" / "shots300_scale1_seed2" / "curve.csv"));

    const auto s = cli({"sweep-study", "--set", "n_max=3", "--set", "J=0.8", "--set", "k_points=11", "--set",
                        "sweep.steps=2,4,8", "--out", at("s")});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_NE(s.out.find("knee:"), std::string::npos);
    EXPECT_EQ(parse_csv(read_file(dir / "s" / "sweep.csv")).rows.size(), 3u);

    const auto m = cli({"mc-convergence", "--set", "solver=ed", "--set", "backend=shots", "--set", "n_max=3", "--set",
                        "k_points=11", "--set", "mc.counts=10,100", "--out", at("m")});
    ASSERT_EQ(m.code, 0) << m.err;
    EXPECT_EQ(parse_csv(read_file(dir / "m" / "mc_convergence.csv")).rows.size(), 2u);
}

TEST_F(Cli, CircuitCountsTable) {
    const auto r = cli({"circuits", "--set", "circuits.n=4,5", "--set", "circuits.square_n_max=100", "--out", at("c")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("230"), std::string::npos);
    EXPECT_NE(r.out.find("270"), std::string::npos);
    EXPECT_NE(r.out.find("303"), std::string::npos);
    EXPECT_NE(r.out.find("3630034"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "c" / "circuits.csv"));
}
