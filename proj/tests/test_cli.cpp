#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cylsde/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("cylsde_cli_test_" + std::to_string(++counter));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const json& cfg, const std::string& name = "config.json") {
    fs::path p = dir / name;
    std::ofstream f(p);
    f << cfg.dump(2);
    return p;
}

int run_cli(const std::string& sub, const fs::path& config, const fs::path& out, int workers = 1,
            const std::string& extra = "") {
    std::ostringstream cmd;
    cmd << CYLSDE_CLI_BIN << " " << sub << " --config " << config << " --out " << out
        << " --workers " << workers << " " << extra << " > /dev/null 2>&1";
    const int rc = std::system(cmd.str().c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json load_json(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(f.good());
    json j;
    f >> j;
    return j;
}

json valid_check_config() {
    return json{
        {"master_seed", 7},
        {"model",
         {{"family", "symmetric-stable"},
          {"alpha", 1.5},
          {"sigma_rule", {{"type", "power"}, {"a", 1.0}, {"p", 0.9}}}}},
        {"weights", {{"type", "sigma-critical"}}},
        {"check", {{"N", 20000}, {"alpha_rule", {{"type", "power"}, {"a", 1.0}, {"p", 1.0}}}}},
    };
}

json divergent_check_config() {
    json cfg = valid_check_config();
    cfg["model"]["sigma_rule"] = {{"type", "power"}, {"a", 1.0}, {"p", 1.0 / 6.0}};
    cfg["weights"] = {{"type", "constant"}, {"a", 1.0}};
    return cfg;
}

json dichotomy_config(long n_paths) {
    return json{
        {"master_seed", 424242},
        {"model",
         {{"family", "symmetric-stable"},
          {"alpha", 1.0},
          {"sigma_rule", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}}}},
        {"weights", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}},
        {"dichotomy", {{"n", 15}, {"k", 1.0}, {"horizon", 25.0}, {"n_paths", n_paths}}},
    };
}

} // namespace

TEST_CASE("cli check: valid configuration exits 0, divergent exits 1 with diagnostic") {
    const auto dir = scratch_dir();
    {
        const auto cfg = write_config(dir, valid_check_config(), "ok.json");
        CHECK(run_cli("check", cfg, dir / "ok_out") == 0);
        const auto report = load_json(dir / "ok_out" / "check_report.json");
        CHECK(report["admissibility"]["c_status"] == "Converges");
    }
    {
        const auto cfg = write_config(dir, divergent_check_config(), "bad.json");
        CHECK(run_cli("check", cfg, dir / "bad_out") == 1);
        const auto report = load_json(dir / "bad_out" / "check_report.json");
        CHECK(report["admissibility"]["c_status"] == "Diverges");
        const std::string diag = report["admissibility"]["diagnostic"];
        CHECK(diag.find("admissibility(c)") != std::string::npos);
    }
    // usage errors: empty config file, missing seed, unknown subcommand
    {
        fs::path empty = dir / "empty.json";
        std::ofstream(empty).close();
        CHECK(run_cli("check", empty, dir / "e_out") == 64);
        json noseed = valid_check_config();
        noseed.erase("master_seed");
        CHECK(run_cli("check", write_config(dir, noseed, "noseed.json"), dir / "n_out") == 64);
        CHECK(run_cli("frobnicate", write_config(dir, valid_check_config(), "u.json"),
                      dir / "u_out") == 64);
    }
}

TEST_CASE("cli check: coefficient checkers fold into the verdict") {
    const auto dir = scratch_dir();
    json cfg = valid_check_config();
    cfg["coefficients"] = {{"preset", "heat-additive"}, {"n", 4}, {"samples", 300}};
    CHECK(run_cli("check", write_config(dir, cfg), dir / "out") == 0);
    const auto report = load_json(dir / "out" / "check_report.json");
    CHECK(report["coefficients"]["coercivity_pass"] == true);
    CHECK(report["coefficients"]["monotonicity_pass"] == true);
}

TEST_CASE("cli dichotomy: stable preset fits the exponential law") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir, dichotomy_config(800));
    CHECK(run_cli("dichotomy", cfg, dir / "out") == 0);
    const auto report = load_json(dir / "out" / "dichotomy_report.json");
    CHECK(report["classification"] == "Exponential");
    CHECK(report["ks_p_value"].get<double>() > 0.001);
    const double lam = report["lambda_analytic"].get<double>();
    CHECK(lam == doctest::Approx((1.0 - std::pow(4.0, -15.0)) / 3.0).epsilon(1e-12));

    // CSV row count equals the manifest's declared count
    const auto manifest = load_json(dir / "out" / "manifest.json");
    std::string why;
    CHECK(cylsde::cli::validate_manifest(manifest, &why));
    bool found = false;
    for (const auto& o : manifest["outputs"])
        if (o["path"] == "taus.csv") {
            found = true;
            CHECK(o["rows"].get<long>() == 800);
        }
    CHECK(found);
    // count data lines
    std::istringstream csv(slurp(dir / "out" / "taus.csv"));
    std::string line;
    long rows = -1; // header
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 800);

    // too few paths is a usage error
    CHECK(run_cli("dichotomy", write_config(dir, dichotomy_config(50), "few.json"), dir / "few") == 64);
}

TEST_CASE("cli dichotomy: zero-jump model classifies as almost surely infinite") {
    const auto dir = scratch_dir();
    json cfg = dichotomy_config(200);
    cfg["model"]["sigma_rule"] = {{"type", "constant"}, {"a", 0.0}};
    cfg["dichotomy"]["horizon"] = 2.0;
    CHECK(run_cli("dichotomy", write_config(dir, cfg), dir / "out") == 0);
    const auto report = load_json(dir / "out" / "dichotomy_report.json");
    CHECK(report["classification"] == "AlmostSurelyInfinite");
}

TEST_CASE("cli solve: deterministic linear run matches the analytic decay") {
    const auto dir = scratch_dir();
    json cfg{
        {"master_seed", 33},
        {"model",
         {{"family", "finite-activity"},
          {"rate", 0.0},
          {"law_inline", {{"u", {0.0, 1.0}}, {"q", {0.0, 0.0}}}},
          {"sigma_rule", {{"type", "constant"}, {"a", 1.0}}}}},
        {"weights", {{"type", "constant"}, {"a", 1.0}}},
        {"levels", {1.0}},
        {"solve",
         {{"preset", "heat-additive"},
          {"n", 2},
          {"dt", 0.001},
          {"T", 0.2},
          {"noise_g", 0.0},
          {"x0", "first-mode"}}},
    };
    CHECK(run_cli("solve", write_config(dir, cfg), dir / "out") == 0);
    // parse the trajectory and compare against exp(-mu_1 t)
    std::istringstream csv(slurp(dir / "out" / "trajectory_0.csv"));
    std::string line;
    std::getline(csv, line); // header
    const double mu1 = cylsde::levy1d::kPi * cylsde::levy1d::kPi;
    double max_err = 0.0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t, x1, x2;
        ls >> t >> x1 >> x2;
        max_err = std::max(max_err, std::fabs(x1 - std::exp(-mu1 * t)));
        max_err = std::max(max_err, std::fabs(x2));
    }
    CHECK(max_err < 2.0 * 0.001 * mu1); // O(dt) bound with a generous constant
}

TEST_CASE("cli solve: hostile preset exits 3 with a partial trajectory") {
    const auto dir = scratch_dir();
    json cfg{
        {"master_seed", 5},
        {"model",
         {{"family", "symmetric-stable"},
          {"alpha", 1.0},
          {"sigma_rule", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}}}},
        {"weights", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}},
        {"levels", {1.0}},
        {"solve",
         {{"preset", "unstable-linear"},
          {"n", 2},
          {"dt", 0.01},
          {"T", 3.0},
          {"blowup_guard", 1e6},
          {"force", true}}},
    };
    CHECK(run_cli("solve", write_config(dir, cfg), dir / "out") == 3);
    const auto report = load_json(dir / "out" / "solve_report.json");
    CHECK(report["n_aborted"].get<long>() == 1);
    CHECK(slurp(dir / "out" / "trajectory_0.csv").size() > 100);
}

TEST_CASE("cli determinism: identical config and seed give byte-identical outputs") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir, dichotomy_config(400));
    CHECK(run_cli("dichotomy", cfg, dir / "w1", 1) == 0);
    CHECK(run_cli("dichotomy", cfg, dir / "w8", 8) == 0);
    CHECK(run_cli("dichotomy", cfg, dir / "w1b", 1) == 0);
    CHECK(slurp(dir / "w1" / "taus.csv") == slurp(dir / "w8" / "taus.csv"));
    CHECK(slurp(dir / "w1" / "taus.csv") == slurp(dir / "w1b" / "taus.csv"));
    CHECK(slurp(dir / "w1" / "dichotomy_report.json") == slurp(dir / "w8" / "dichotomy_report.json"));

    // patched stable solve, rerun byte-identical
    json scfg{
        {"master_seed", 99},
        {"model",
         {{"family", "symmetric-stable"},
          {"alpha", 1.0},
          {"sigma_rule", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}}}},
        {"weights", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}},
        {"levels", {1.0, 4.0, 16.0}},
        {"solve",
         {{"preset", "heat-additive"}, {"n", 3}, {"dt", 0.01}, {"T", 1.0}, {"solver", "patched"}}},
    };
    const auto sc = write_config(dir, scfg, "solve.json");
    CHECK(run_cli("solve", sc, dir / "s1", 1) == 0);
    CHECK(run_cli("solve", sc, dir / "s2", 4) == 0);
    CHECK(slurp(dir / "s1" / "trajectory_0.csv") == slurp(dir / "s2" / "trajectory_0.csv"));
    CHECK(slurp(dir / "s1" / "patches_0.csv") == slurp(dir / "s2" / "patches_0.csv"));
}

TEST_CASE("cli converge: deterministic table shows the halving ratio") {
    const auto dir = scratch_dir();
    json cfg{
        {"master_seed", 1},
        {"converge",
         {{"preset", "heat-additive"},
          {"n_values", {4}},
          {"dt_values", {0.004, 0.002, 0.001}},
          {"T", 0.2},
          {"zero_noise", true},
          {"noise_g", 0.0},
          {"x0", "first-mode"}}},
    };
    CHECK(run_cli("converge", write_config(dir, cfg), dir / "out") == 0);
    std::istringstream csv(slurp(dir / "out" / "converge.csv"));
    std::string line;
    std::getline(csv, line); // header
    int row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double n, dt, paths, err, ratio;
        ls >> n >> dt >> paths >> err >> ratio;
        if (row > 0) {
            CHECK(ratio >= 1.7);
            CHECK(ratio <= 2.3);
        }
        ++row;
    }
    CHECK(row == 3);
}

TEST_CASE("cli check: uncertifiable configuration exits 2 (inconclusive)") {
    const auto dir = scratch_dir();
    // finite-activity two-point law with k below the jump size: m^c(k) is a
    // divergent constant series the numeric ceiling cannot certify
    json cfg{
        {"master_seed", 3},
        {"model",
         {{"family", "finite-activity"},
          {"rate", 1.0},
          {"law_inline", {{"u", {0.0, 0.5, 0.5, 1.0}}, {"q", {-1.0, -1.0, 1.0, 1.0}}}},
          {"sigma_rule", {{"type", "constant"}, {"a", 1.0}}}}},
        {"weights", {{"type", "constant"}, {"a", 1.0}}},
        {"check", {{"N", 2000}, {"k_list", {0.5, 1.0, 2.0}}}},
    };
    CHECK(run_cli("check", write_config(dir, cfg), dir / "out") == 2);
    const auto report = load_json(dir / "out" / "check_report.json");
    CHECK(report["admissibility"]["c_status"] == "Inconclusive");
}

TEST_CASE("cli dichotomy: everything censored reports Inconclusive and exits 2") {
    const auto dir = scratch_dir();
    json cfg{
        {"master_seed", 8},
        {"model",
         {{"family", "symmetric-stable"},
          {"alpha", 1.0},
          {"sigma_rule", {{"type", "geometric"}, {"a", 1e-7}, {"r", 0.5}}}}},
        {"weights", {{"type", "geometric"}, {"a", 1.0}, {"r", 0.5}}},
        {"dichotomy", {{"n", 2}, {"k", 1.0}, {"horizon", 1.0}, {"n_paths", 150}}},
    };
    CHECK(run_cli("dichotomy", write_config(dir, cfg), dir / "out") == 2);
    const auto report = load_json(dir / "out" / "dichotomy_report.json");
    CHECK(report["classification"] == "Inconclusive");
    CHECK(report["n_censored"].get<long>() == 150);
}

TEST_CASE("cli: tabulated law loaded from a file next to the config") {
    const auto dir = scratch_dir();
    {
        std::ofstream law(dir / "law.txt");
        law << "# symmetric two-point law at +-2\n";
        law << "0    -2\n0.5  -2\n0.5   2\n1     2\n";
    }
    json cfg{
        {"master_seed", 4},
        {"model",
         {{"family", "finite-activity"},
          {"rate", 1.5},
          {"law_file", "law.txt"},
          {"sigma_rule", {{"type", "constant"}, {"a", 1.0}}}}},
        {"weights", {{"type", "constant"}, {"a", 1.0}}},
        {"dichotomy", {{"n", 3}, {"k", 1.0}, {"horizon", 10.0}, {"n_paths", 400}}},
    };
    CHECK(run_cli("dichotomy", write_config(dir, cfg), dir / "out") == 0);
    const auto report = load_json(dir / "out" / "dichotomy_report.json");
    // every jump has size 2 > k/c = 1: lambda = n * rate = 4.5
    CHECK(report["lambda_analytic"].get<double>() == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(report["classification"] == "Exponential");
}
