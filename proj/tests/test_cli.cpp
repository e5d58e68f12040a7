#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <canopy/csv.hpp>
#include <canopy/json_io.hpp>
#include <canopy/rng.hpp>

namespace fs = std::filesystem;
using canopy::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(CANOPY_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    RunResult r;
    char buf[4096];
    while (fgets(buf, sizeof(buf), pipe) != nullptr) r.out += buf;
    int st = pclose(pipe);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

RunResult run_env(const std::string& env, const std::string& args) {
    std::string cmd = env + " " + std::string(CANOPY_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    RunResult r;
    char buf[4096];
    while (fgets(buf, sizeof(buf), pipe) != nullptr) r.out += buf;
    int st = pclose(pipe);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        char tmpl[] = "/tmp/canopy_cli_XXXXXX";
        ASSERT_NE(mkdtemp(tmpl), nullptr);
        dir_ = tmpl;
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    std::string write_params(const std::string& name = "params.json", double sigma = 0.258) {
        canopy::ModelParams mp;
        mp.mu = 0.0482;
        mp.sigma = sigma;
        mp.rho = 0.0487;
        mp.gamma = 2.272;
        mp.g2_form = canopy::G2Form::PowA;
        mp.g2_k2 = 1.0;
        std::string p = path(name);
        canopy::save_json(canopy::params_to_json(mp), p);
        return p;
    }

    std::string write_prior(const std::string& name = "prior.json") {
        std::string p = path(name);
        canopy::save_json(json{{"alpha", 0.553}, {"beta", 2.251}}, p);
        return p;
    }

    std::string write_panel(const std::string& name = "panel.csv") {
        canopy::Rng draw(canopy::derive_seed(5, "cli-panel"));
        std::string p = path(name);
        canopy::CsvWriter w(p);
        w.row({"unit_id", "year", "tree_area_km2", "atr_share"});
        for (int u = 0; u < 15; ++u) {
            double a = draw.beta(0.553, 2.251);
            double x = 30.0 + 100.0 * draw.uniform();
            canopy::Rng path_rng(canopy::derive_seed(5, "cli-path", u));
            char id[16];
            std::snprintf(id, sizeof(id), "u%02d", u);
            for (int t = 0; t < 8; ++t) {
                w.row({id, std::to_string(2000 + t), canopy::csv_num(x), canopy::csv_num(a)});
                x *= std::exp(0.01 + 0.25 * path_rng.normal());
            }
        }
        return p;
    }

    // growth carries the model-implied clearing rate, so fit-gamma has a root
    std::string write_model_panel(const std::string& name = "model_panel.csv") {
        canopy::ModelParams mp;
        mp.mu = 0.0482;
        mp.sigma = 0.258;
        mp.rho = 0.0487;
        mp.gamma = 2.272;
        canopy::BeliefPrior pr{0.553, 2.251};
        canopy::EquilibriumSolution sol = canopy::q_mfe_stationary(mp, pr);
        canopy::Rng draw(canopy::derive_seed(5, "cli-model-panel"));
        std::string p = path(name);
        canopy::CsvWriter w(p);
        w.row({"unit_id", "year", "tree_area_km2", "atr_share"});
        for (int u = 0; u < 60; ++u) {
            double a = draw.beta(pr.alpha, pr.beta);
            double x = 30.0 + 100.0 * draw.uniform();
            double rate = canopy::mfe_rate(a, mp, sol.coupling_aggregate);
            canopy::Rng path_rng(canopy::derive_seed(5, "cli-model-path", u));
            char id[16];
            std::snprintf(id, sizeof(id), "m%02d", u);
            for (int t = 0; t < 12; ++t) {
                w.row({id, std::to_string(2000 + t), canopy::csv_num(x), canopy::csv_num(a)});
                double growth;
                do {
                    growth = 1.0 + (mp.mu - rate) + mp.sigma * path_rng.normal();
                } while (growth < 0.02);
                x *= growth;
            }
        }
        return p;
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string dir_;
};

}  // namespace

TEST_F(CliTest, HelpExitsCleanlyAndMissingSubcommandFails) {
    EXPECT_EQ(run("--help").code, 0);
    RunResult none = run("");
    EXPECT_EQ(none.code, 2);
    RunResult unknown = run("frobnicate");
    EXPECT_EQ(unknown.code, 2);
}

TEST_F(CliTest, EquilibriumWritesSolutionAndIsByteStable) {
    std::string params = write_params();
    std::string prior = write_prior();
    std::string out1 = path("out1");
    std::string out2 = path("out2");
    RunResult r1 = run("--output-dir " + out1 + " equilibrium --params " + params + " --prior " +
                       prior);
    ASSERT_EQ(r1.code, 0) << r1.out;
    EXPECT_NE(r1.out.find("q_tilde_star"), std::string::npos);
    EXPECT_NE(r1.out.find("SwitchesAt"), std::string::npos);

    json sol = canopy::load_json(out1 + "/equilibrium.json");
    EXPECT_NEAR(sol["q_tilde_star"].get<double>(), 0.0738706306, 1e-9);
    EXPECT_NEAR(sol["threshold"].get<double>(), 0.014918, 1e-9);
    EXPECT_EQ(sol["grid"].size(), 101u);
    EXPECT_TRUE(fs::exists(out1 + "/equilibrium.csv"));

    RunResult r2 = run("--output-dir " + out2 + " equilibrium --params " + params + " --prior " +
                       prior);
    ASSERT_EQ(r2.code, 0);
    EXPECT_EQ(slurp(out1 + "/equilibrium.json"), slurp(out2 + "/equilibrium.json"));
    EXPECT_EQ(slurp(out1 + "/equilibrium.csv"), slurp(out2 + "/equilibrium.csv"));
}

TEST_F(CliTest, EquilibriumFiniteHorizonMode) {
    std::string params = write_params();
    std::string prior = write_prior();
    RunResult r = run("--output-dir " + dir_ + " equilibrium --params " + params + " --prior " +
                      prior + " --horizon 10");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(path("finite_horizon.json")));
    EXPECT_TRUE(fs::exists(path("median_rate_path.csv")));
    json fh = canopy::load_json(path("finite_horizon.json"));
    EXPECT_TRUE(fh["converged"].get<bool>());
    EXPECT_EQ(fh["time_grid"].size(), 21u);
}

TEST_F(CliTest, ValidationFailuresExitTwo) {
    std::string bad_params = write_params("bad.json", -0.5);
    std::string prior = write_prior();
    RunResult r = run("--output-dir " + dir_ + " equilibrium --params " + bad_params +
                      " --prior " + prior);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("sigma"), std::string::npos);

    // unknown field in a params file is rejected, not ignored
    json j = canopy::load_json(bad_params);
    j["sigma"] = 0.258;
    j["sigmma"] = 0.3;
    canopy::save_json(j, path("typo.json"));
    RunResult r2 = run("--output-dir " + dir_ + " equilibrium --params " + path("typo.json") +
                       " --prior " + prior);
    EXPECT_EQ(r2.code, 2);
    EXPECT_NE(r2.out.find("sigmma"), std::string::npos);

    RunResult r3 = run("--output-dir " + dir_ + " equilibrium --params " + path("nope.json") +
                       " --prior " + prior);
    EXPECT_EQ(r3.code, 2);
}

TEST_F(CliTest, ConfigSuppliesDefaultsAndFlagsWin) {
    std::string params = write_params();
    std::string prior = write_prior();
    json cfg = {{"equilibrium",
                 {{"params", params}, {"prior", prior}, {"grid_points", 11}}}};
    canopy::save_json(cfg, path("cfg.json"));

    std::string out1 = path("o1");
    RunResult r1 = run("--config " + path("cfg.json") + " --output-dir " + out1 + " equilibrium");
    ASSERT_EQ(r1.code, 0) << r1.out;
    EXPECT_EQ(canopy::load_json(out1 + "/equilibrium.json")["grid"].size(), 11u);

    std::string out2 = path("o2");
    RunResult r2 = run("--config " + path("cfg.json") + " --output-dir " + out2 +
                       " equilibrium --grid-points 31");
    ASSERT_EQ(r2.code, 0) << r2.out;
    EXPECT_EQ(canopy::load_json(out2 + "/equilibrium.json")["grid"].size(), 31u);
}

TEST_F(CliTest, SimulateWritesPathsAndDensity) {
    std::string params = write_params();
    RunResult r = run("--output-dir " + dir_ + " simulate --params " + params +
                      " --x0 40 --rate 0.02 --horizon 10 --dt 0.5 --paths 3 --density-at 5");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(path("path_0000.csv")));
    EXPECT_TRUE(fs::exists(path("path_0002.csv")));
    EXPECT_TRUE(fs::exists(path("density.csv")));
    canopy::CsvTable t = canopy::read_csv(path("path_0000.csv"));
    EXPECT_EQ(t.rows.size(), 21u);
    EXPECT_EQ(t.columns[0], "t");

    // same seed, same bytes
    std::string again = path("again");
    RunResult r2 = run("--output-dir " + again + " simulate --params " + params +
                       " --x0 40 --rate 0.02 --horizon 10 --dt 0.5 --paths 3");
    ASSERT_EQ(r2.code, 0);
    EXPECT_EQ(slurp(path("path_0001.csv")), slurp(again + "/path_0001.csv"));

    // different root seed, different draws
    std::string other = path("other");
    RunResult r3 = run("--seed 7 --output-dir " + other + " simulate --params " + params +
                       " --x0 40 --rate 0.02 --horizon 10 --dt 0.5 --paths 1");
    ASSERT_EQ(r3.code, 0);
    EXPECT_NE(slurp(path("path_0000.csv")), slurp(other + "/path_0000.csv"));

    RunResult bad = run("--output-dir " + dir_ + " simulate --params " + params +
                        " --horizon 10 --dt 0.3");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("dt"), std::string::npos);
}

TEST_F(CliTest, FitBeliefsReadsShareColumn) {
    canopy::Rng rng(canopy::derive_seed(9, "cli-shares"));
    {
        canopy::CsvWriter w(path("shares.csv"));
        w.row({"unit_id", "atr_share"});
        for (int i = 0; i < 800; ++i)
            w.row({"u" + std::to_string(i), canopy::csv_num(rng.beta(0.553, 2.251))});
    }
    RunResult r = run("--output-dir " + dir_ + " fit-beliefs --input " + path("shares.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    json fit = canopy::load_json(path("fit_beliefs.json"));
    EXPECT_TRUE(fit["converged"].get<bool>());
    double al = fit["estimates"]["alpha"].get<double>();
    double se = fit["std_errors"]["alpha"].get<double>();
    EXPECT_NEAR(al, 0.553, 4.0 * se);

    // missing column reports the file
    {
        canopy::CsvWriter w(path("noshare.csv"));
        w.row({"unit_id", "share"});
        w.row({"u1", "0.5"});
    }
    RunResult bad = run("--output-dir " + dir_ + " fit-beliefs --input " + path("noshare.csv"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("atr_share"), std::string::npos);
}

TEST_F(CliTest, FitGbmAndCounterfactualOnPanel) {
    std::string panel = write_panel();
    std::string params = write_params();
    std::string prior = write_prior();
    RunResult r = run("--output-dir " + dir_ + " fit-gbm --input " + panel +
                      " --bootstrap-reps 200");
    ASSERT_EQ(r.code, 0) << r.out;
    json fit = canopy::load_json(path("fit_gbm.json"));
    EXPECT_GT(fit["std_errors"]["mu"].get<double>(), 0.0);

    RunResult cf = run("--output-dir " + dir_ + " counterfactual --params " + params +
                       " --prior " + prior + " --panel " + panel + " --t0 2000 --t1 2007");
    ASSERT_EQ(cf.code, 0) << cf.out;
    json cj = canopy::load_json(path("counterfactual.json"));
    EXPECT_EQ(cj["summary"]["n_units"].get<int>(), 15);
    EXPECT_TRUE(cj["summary"].contains("pct_of_observed"));
    EXPECT_TRUE(fs::exists(path("counterfactual.csv")));

    RunResult bad = run("--output-dir " + dir_ + " counterfactual --params " + params +
                        " --prior " + prior + " --panel " + panel + " --t0 2000 --t1 1999");
    EXPECT_EQ(bad.code, 2);
}

TEST_F(CliTest, FitGammaConvergenceFailureExitsThree) {
    std::string panel = write_model_panel();
    std::string prior = write_prior();
    RunResult ok = run("--output-dir " + dir_ + " fit-gamma --input " + panel + " --prior " +
                       prior + " --mu 0.0482 --sigma 0.258 --rho 0.0487 --k 1");
    ASSERT_EQ(ok.code, 0) << ok.out;
    EXPECT_TRUE(fs::exists(path("fit_gamma.json")));

    // a drift no curvature value can rationalize: scan finds no root
    RunResult r = run("--output-dir " + dir_ + " fit-gamma --input " + panel + " --prior " +
                      prior + " --mu 0.60 --sigma 0.258 --rho 0.0487 --k 1");
    EXPECT_EQ(r.code, 3) << r.out;
    json fit = canopy::load_json(path("fit_gamma.json"));
    EXPECT_FALSE(fit["converged"].get<bool>());
    EXPECT_FALSE(fit["criterion_profile"].empty());
}

TEST_F(CliTest, InstrumentBuildsExposureIndex) {
    {
        canopy::CsvWriter w(path("units.csv"));
        w.row({"unit_id", "lat", "lon", "language_nodes"});
        w.row({"nikki", "9.94", "3.21",
               "Niger-Congo;Atlantic-Congo;Volta-Congo;North;Gur;Bariba"});
        w.row({"ketou", "7.36", "2.60",
               "Niger-Congo;Atlantic-Congo;Volta-Congo;Benue-Congo;Defoid;Yoruboid;Edekiri"});
    }
    {
        canopy::CsvWriter w(path("tx.csv"));
        w.row({"name", "lat", "lon", "freq_mhz", "erp_dbm", "year_active"});
        w.row({"lagos_fm", "6.52", "3.38", "95.1", "70", "1990"});
        w.row({"ibadan_fm", "7.40", "3.92", "98.5", "67", "2003"});
    }
    {
        canopy::CsvWriter w(path("dens.csv"));
        w.row({"year", "pentecostal_count", "land_area_km2"});
        w.row({"2000", "1500", "1200"});
        w.row({"2005", "2600", "1200"});
    }
    RunResult r = run("--output-dir " + dir_ + " instrument --units " + path("units.csv") +
                      " --transmitters " + path("tx.csv") + " --density " + path("dens.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    canopy::CsvTable t = canopy::read_csv(path("exposure.csv"));
    ASSERT_EQ(t.rows.size(), 4u);  // 2 units x 2 years
    int c_id = t.col("unit_id"), c_ld = t.col("ld"), c_z = t.col("z");
    for (size_t i = 0; i < t.rows.size(); ++i) {
        double ld = canopy::csv_double(t, i, c_ld);
        if (t.rows[i][c_id] == "nikki")
            EXPECT_NEAR(ld, 0.320633779513, 1e-9);  // default lambda 0.5
        else
            EXPECT_NEAR(ld, 0.0, 1e-12);  // broadcast language
        EXPECT_TRUE(std::isfinite(canopy::csv_double(t, i, c_z)));
    }

    // malformed numeric cell reports file and line
    {
        canopy::CsvWriter w(path("dens_bad.csv"));
        w.row({"year", "pentecostal_count", "land_area_km2"});
        w.row({"2000", "many", "1200"});
    }
    RunResult bad = run("--output-dir " + dir_ + " instrument --units " + path("units.csv") +
                        " --transmitters " + path("tx.csv") + " --density " + path("dens_bad.csv"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("dens_bad.csv:2"), std::string::npos);
}

TEST_F(CliTest, DemoRunsPipelineAndWritesStableData) {
    RunResult r = run("--output-dir " + dir_ + " demo");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("q~*"), std::string::npos);
    EXPECT_NE(r.out.find("fit-gbm"), std::string::npos);

    std::string d1 = path("data1");
    std::string d2 = path("data2");
    RunResult w1 = run("--output-dir " + dir_ + " demo --write-data " + d1);
    RunResult w2 = run("--output-dir " + dir_ + " demo --write-data " + d2);
    ASSERT_EQ(w1.code, 0);
    ASSERT_EQ(w2.code, 0);
    for (const char* f : {"synthetic_panel.csv", "synthetic_untouched.csv", "synthetic_beta.csv",
                          "params_baseline.json", "prior_baseline.json"}) {
        SCOPED_TRACE(f);
        ASSERT_TRUE(fs::exists(d1 + "/" + f));
        EXPECT_EQ(slurp(d1 + "/" + f), slurp(d2 + "/" + f));
    }
}

TEST_F(CliTest, OutputDirEnvironmentVariableIsHonored) {
    std::string params = write_params();
    std::string prior = write_prior();
    std::string envdir = path("from_env");
    RunResult r = run_env("CANOPY_OUTPUT_DIR=" + envdir,
                          "equilibrium --params " + params + " --prior " + prior);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(envdir + "/equilibrium.json"));
}
