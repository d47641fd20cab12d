#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cylsde/csv.hpp"
#include "cylsde/cylnoise.hpp"
#include "cylsde/galerkin.hpp"
#include "cylsde/stochint.hpp"

namespace cylsde::cli {

using nlohmann::json;

inline constexpr const char* kArtifactVersion = "0.1.0";

// Exit-code contract: 0 pass, 1 violation, 2 inconclusive, 3 blow-up, 64 usage.
enum ExitCode : int {
    kOk = 0,
    kViolation = 1,
    kInconclusive = 2,
    kBlowUp = 3,
    kUsage = 64,
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    json root;
    std::filesystem::path config_dir; // for resolving relative law files
    std::uint64_t master_seed = 0;
    int workers = 1;
    std::filesystem::path out_dir;
};

inline const json& require_key(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("missing key '" + key + "' in " + ctx);
    return *it;
}

inline double require_positive(const json& j, const std::string& key, const std::string& ctx) {
    const double v = require_key(j, key, ctx).get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + key + "' must be positive in " + ctx);
    return v;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                                    std::optional<std::string> out_override,
                                    std::optional<int> workers_override) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    ExperimentConfig cfg;
    try {
        f >> cfg.root;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.root.is_object() || cfg.root.empty()) throw ConfigError("config must be a non-empty object");
    cfg.config_dir = std::filesystem::absolute(path).parent_path();
    if (seed_override) cfg.master_seed = *seed_override;
    else if (cfg.root.contains("master_seed")) cfg.master_seed = cfg.root["master_seed"].get<std::uint64_t>();
    else throw ConfigError("master_seed is mandatory (entropy-seeded runs are not supported)");
    cfg.workers = workers_override ? *workers_override : cfg.root.value("workers", 1);
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    cfg.out_dir = out_override ? std::filesystem::path(*out_override)
                               : std::filesystem::path(cfg.root.value("out", "out"));
    return cfg;
}

inline DecayRule parse_rule(const json& j, const std::string& ctx) {
    const std::string type = require_key(j, "type", ctx).get<std::string>();
    if (type == "power") {
        return DecayRule::power(require_key(j, "a", ctx).get<double>(),
                                require_key(j, "p", ctx).get<double>());
    }
    if (type == "geometric") {
        return DecayRule::geometric(require_key(j, "a", ctx).get<double>(),
                                    require_key(j, "r", ctx).get<double>());
    }
    if (type == "constant") {
        return DecayRule::constant(require_key(j, "a", ctx).get<double>());
    }
    throw ConfigError("unknown rule type '" + type + "' in " + ctx);
}

inline cylnoise::ClosedFormSpec parse_model(const ExperimentConfig& cfg) {
    const json& m = require_key(cfg.root, "model", "config");
    cylnoise::ClosedFormSpec spec;
    const std::string family = require_key(m, "family", "model").get<std::string>();
    spec.sigma = parse_rule(require_key(m, "sigma_rule", "model"), "model.sigma_rule");
    spec.gaussian_s = m.value("gaussian_s", 0.0);
    if (spec.gaussian_s < 0.0) throw ConfigError("model.gaussian_s must be >= 0");
    if (family == "symmetric-stable") {
        spec.family = levy1d::MeasureKind::SymmetricStable;
        spec.alpha = require_positive(m, "alpha", "model");
    } else if (family == "one-sided-stable") {
        spec.family = levy1d::MeasureKind::OneSidedStable;
        spec.alpha = require_positive(m, "alpha", "model");
        spec.intensity_c = require_key(m, "intensity_c", "model").get<double>();
    } else if (family == "regularly-varying") {
        spec.family = levy1d::MeasureKind::RegularlyVarying;
        spec.alpha = require_positive(m, "alpha", "model");
        spec.pareto_x0 = require_positive(m, "pareto_x0", "model");
    } else if (family == "finite-activity") {
        spec.family = levy1d::MeasureKind::FiniteActivity;
        spec.fa_rate = require_key(m, "rate", "model").get<double>();
        if (spec.fa_rate < 0.0) throw ConfigError("model.rate must be >= 0");
        if (m.contains("law_file")) {
            const auto p = cfg.config_dir / m["law_file"].get<std::string>();
            spec.fa_law = std::make_shared<levy1d::TabulatedLaw>(levy1d::TabulatedLaw::load_file(p.string()));
        } else if (m.contains("law_inline")) {
            const json& li = m["law_inline"];
            spec.fa_law = std::make_shared<levy1d::TabulatedLaw>(
                li["u"].get<std::vector<double>>(), li["q"].get<std::vector<double>>());
        } else {
            throw ConfigError("finite-activity model needs law_file or law_inline");
        }
    } else {
        throw ConfigError("unknown model.family '" + family + "'");
    }
    // construct one component up front so invalid parameters fail at load time
    (void)spec.make_triplet(1);
    return spec;
}

inline cylnoise::WeightSequence parse_weights(const ExperimentConfig& cfg,
                                              const cylnoise::ClosedFormSpec& model) {
    const json& w = require_key(cfg.root, "weights", "config");
    const std::string type = require_key(w, "type", "weights").get<std::string>();
    if (type == "sigma-critical") return cylnoise::WeightSequence::critical_for(model);
    return cylnoise::WeightSequence::from_rule(parse_rule(w, "weights"));
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

struct RunManifest {
    json doc;
    std::filesystem::path out_dir;

    RunManifest(const std::string& command, const ExperimentConfig& cfg) : out_dir(cfg.out_dir) {
        doc["artifact_version"] = kArtifactVersion;
        doc["command"] = command;
        doc["master_seed"] = cfg.master_seed;
        doc["workers"] = cfg.workers;
        doc["config"] = cfg.root;
        doc["timings_ms"] = json::object();
        doc["results"] = json::object();
        doc["outputs"] = json::array();
    }

    void add_timing(const std::string& stage, double ms) { doc["timings_ms"][stage] = ms; }

    void add_output_csv(const std::string& name, const Csv& csv) {
        std::filesystem::create_directories(out_dir);
        csv.write((out_dir / name).string());
        doc["outputs"].push_back({{"path", name}, {"rows", csv.row_count()}});
    }

    void add_output_json(const std::string& name, const json& j) {
        std::filesystem::create_directories(out_dir);
        std::ofstream f(out_dir / name, std::ios::binary);
        f << j.dump(2) << "\n";
        doc["outputs"].push_back({{"path", name}, {"rows", nullptr}});
    }

    void write() const {
        std::filesystem::create_directories(out_dir);
        std::ofstream f(out_dir / "manifest.json", std::ios::binary);
        f << doc.dump(2) << "\n";
    }
};

/// Structural validation of a manifest document against the published schema
/// (docs/manifest.schema.json describes the same shape for humans).
inline bool validate_manifest(const json& m, std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!m.is_object()) return fail("manifest is not an object");
    for (const char* key : {"artifact_version", "command", "master_seed", "workers", "config",
                            "timings_ms", "results", "outputs"})
        if (!m.contains(key)) return fail(std::string("missing key ") + key);
    if (!m["outputs"].is_array()) return fail("outputs is not an array");
    for (const auto& o : m["outputs"]) {
        if (!o.is_object() || !o.contains("path") || !o.contains("rows"))
            return fail("output entry missing path/rows");
    }
    if (!m["command"].is_string() || !m["config"].is_object()) return fail("bad command/config types");
    return true;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline json verdict_json(const ConvergenceVerdict& v) {
    json j;
    j["status"] = to_string(v.status);
    j["partial_sum"] = v.partial_sum;
    j["terms_used"] = v.terms_used;
    if (v.tail_bound) j["tail_bound"] = *v.tail_bound;
    return j;
}

/// check: series validity conditions, weight admissibility, and (when a preset is
/// configured) the coefficient checkers. Exit 0 all pass / 1 violation /
/// 2 inconclusive / 64 bad config.
inline int cmd_check(const ExperimentConfig& cfg) {
    RunManifest manifest("check", cfg);
    Stopwatch total;
    const auto model = parse_model(cfg);
    const auto L = cylnoise::DiagonalCylindricalLevy::closed_form(model);
    const auto weights = parse_weights(cfg, model);

    const json& ck = cfg.root.contains("check") ? cfg.root["check"] : json::object();
    const long N = ck.value("N", 100000L);
    DecayRule alpha_rule = ck.contains("alpha_rule")
                               ? parse_rule(ck["alpha_rule"], "check.alpha_rule")
                               : DecayRule::power(1.0, 1.0);
    std::vector<double> k_list = ck.value("k_list", std::vector<double>{1, 2, 4, 8, 16});

    json report;
    bool violation = false;
    bool inconclusive = false;
    auto fold = [&](SumStatus s) {
        if (s == SumStatus::Diverges) violation = true;
        else if (s == SumStatus::Inconclusive) inconclusive = true;
    };

    Stopwatch series_sw;
    const auto series = cylnoise::check_series_conditions(L, alpha_rule, N);
    manifest.add_timing("series_conditions", series_sw.ms());
    report["series"] = {{"cond1", verdict_json(series.cond1)},
                        {"cond2", verdict_json(series.cond2)},
                        {"cond3", verdict_json(series.cond3)}};
    fold(series.cond1.status);
    fold(series.cond2.status);
    fold(series.cond3.status);

    Stopwatch a6_sw;
    const auto a6 = cylnoise::check_admissibility(L, weights, k_list, N);
    manifest.add_timing("admissibility", a6_sw.ms());
    json a6j;
    a6j["a_status"] = to_string(a6.a_status);
    a6j["b_status"] = to_string(a6.b_status);
    a6j["c_status"] = to_string(a6.c_status);
    a6j["diagnostic"] = a6.diagnostic;
    a6j["mc_nonincreasing"] = a6.mc_nonincreasing;
    a6j["mc_limit_zero_certified"] = a6.mc_limit_zero_certified;
    json mcj = json::array();
    for (const auto& [k, r] : a6.mc)
        mcj.push_back({{"k", k}, {"value", r.value}, {"status", to_string(r.verdict.status)}});
    a6j["m_c"] = mcj;
    report["admissibility"] = a6j;
    fold(a6.a_status);
    fold(a6.b_status);
    fold(a6.c_status);

    if (cfg.root.contains("coefficients")) {
        const json& co = cfg.root["coefficients"];
        const int n = require_key(co, "n", "coefficients").get<int>();
        const long samples = co.value("samples", 2000L);
        const double radius = co.value("radius", 4.0);
        std::vector<double> q(static_cast<std::size_t>(n));
        const double k0 = co.value("k", 1.0);
        double q_sup = 0.0;
        for (long j = 1; j <= n; ++j) {
            const auto t = L.component(j);
            q[static_cast<std::size_t>(j - 1)] =
                t.gaussian_s + t.measure.truncated_second_moment(k0 / weights.at(j));
            q_sup = std::max(q_sup, q[static_cast<std::size_t>(j - 1)]);
        }
        galerkin::PresetParams prm;
        prm.noise_g = co.value("noise_g", 0.2);
        prm.lipschitz = co.value("lipschitz", 0.5);
        prm.radius = radius;
        prm.q_sup = q_sup; // the registered constants assume this covariance bound
        const auto prob = galerkin::make_preset(
            require_key(co, "preset", "coefficients").get<std::string>(), n, prm);
        RandomStream rng(cfg.master_seed ^ 0xc0eff5);
        Stopwatch co_sw;
        const auto coer = galerkin::check_coercivity(prob.triple, prob.coeffs, q, samples, radius, rng);
        const auto mono = galerkin::check_monotonicity(prob.triple, prob.coeffs, q, samples, radius,
                                                       rng.derive(1));
        const auto grow = galerkin::check_growth_hemicontinuity(prob.triple, prob.coeffs,
                                                                std::min<long>(samples, 200), radius,
                                                                rng.derive(2));
        manifest.add_timing("coefficient_checks", co_sw.ms());
        report["coefficients"] = {{"coercivity_worst_margin", coer.worst_margin},
                                  {"coercivity_pass", coer.pass},
                                  {"monotonicity_worst_margin", mono.worst_margin},
                                  {"monotonicity_pass", mono.pass},
                                  {"growth_max_ratio", grow.max_growth_ratio},
                                  {"growth_pass", grow.growth_pass},
                                  {"hemicontinuity_flag", grow.discontinuity_suspected}};
        if (!coer.pass || !mono.pass || !grow.growth_pass || grow.discontinuity_suspected)
            violation = true;
    }

    const int exit_code = violation ? kViolation : (inconclusive ? kInconclusive : kOk);
    report["exit_code"] = exit_code;
    manifest.doc["results"] = report;
    manifest.add_output_json("check_report.json", report);
    manifest.add_timing("total", total.ms());
    manifest.write();
    return exit_code;
}

/// dichotomy: sample tau_n^c(k), KS-test against the exponential law, emit the
/// tau samples CSV and a flat report.
inline int cmd_dichotomy(const ExperimentConfig& cfg) {
    RunManifest manifest("dichotomy", cfg);
    Stopwatch total;
    const auto model = parse_model(cfg);
    const auto L = cylnoise::DiagonalCylindricalLevy::closed_form(model);
    const auto weights = parse_weights(cfg, model);

    const json& dj = require_key(cfg.root, "dichotomy", "config");
    const long n = require_key(dj, "n", "dichotomy").get<long>();
    const double k = require_positive(dj, "k", "dichotomy");
    const double horizon = require_positive(dj, "horizon", "dichotomy");
    const long n_paths = require_key(dj, "n_paths", "dichotomy").get<long>();
    if (n < 1) throw ConfigError("dichotomy.n must be >= 1");
    if (n_paths < 100) throw ConfigError("dichotomy.n_paths must be >= 100");

    const auto rep = cylnoise::dichotomy_test(L, weights, k, n, n_paths, horizon, cfg.master_seed,
                                              cfg.workers);

    Csv taus;
    taus.header = {"path_index", "tau", "censored"};
    for (long p = 0; p < rep.n_paths; ++p)
        taus.add_row({std::to_string(p), format_double(rep.taus[static_cast<std::size_t>(p)]),
                      rep.censored[static_cast<std::size_t>(p)] ? "1" : "0"});
    manifest.add_output_csv("taus.csv", taus);

    json report;
    report["lambda_analytic"] = rep.lambda_analytic;
    report["m_ck_partial_sum"] = rep.m_full.value;
    report["m_ck_status"] = to_string(rep.m_full.verdict.status);
    report["lambda_hat"] = rep.lambda_hat;
    report["ks_statistic"] = rep.ks_valid ? json(rep.ks.statistic) : json();
    report["ks_p_value"] = rep.ks_valid ? json(rep.ks.p_value) : json();
    report["classification"] = to_string(rep.classification);
    report["n_paths"] = rep.n_paths;
    report["n_censored"] = rep.n_censored;
    report["horizon_used"] = rep.horizon_used;
    manifest.add_output_json("dichotomy_report.json", report);
    manifest.doc["results"] = report;
    manifest.add_timing("total", total.ms());
    manifest.write();
    return rep.classification == cylnoise::TailClassification::Inconclusive ? kInconclusive : kOk;
}

inline std::vector<double> parse_x0(const json& sj, int n) {
    if (!sj.contains("x0") || sj["x0"] == "first-mode") {
        std::vector<double> x0(static_cast<std::size_t>(n), 0.0);
        x0[0] = 1.0;
        return x0;
    }
    if (sj["x0"] == "zero") return std::vector<double>(static_cast<std::size_t>(n), 0.0);
    auto x0 = sj["x0"].get<std::vector<double>>();
    if (static_cast<int>(x0.size()) != n) throw ConfigError("solve.x0 has wrong dimension");
    return x0;
}

/// solve: projected (single level) or patched (ladder) Euler runs; trajectory
/// CSVs, patch log, energy ledger; energy-identity report on ensembles.
inline int cmd_solve(const ExperimentConfig& cfg) {
    RunManifest manifest("solve", cfg);
    Stopwatch total;
    const auto model = parse_model(cfg);
    const auto L = cylnoise::DiagonalCylindricalLevy::closed_form(model);
    const auto weights = parse_weights(cfg, model);

    const json& sj = require_key(cfg.root, "solve", "config");
    const int n = require_key(sj, "n", "solve").get<int>();
    const double T = require_positive(sj, "T", "solve");
    const double dt = require_positive(sj, "dt", "solve");
    const long n_paths = sj.value("n_paths", 1L);
    const long write_traj = sj.value("write_trajectories", 1L);
    const double lambda = sj.value("lambda", 0.0);
    std::vector<double> ladder = cfg.root.value("levels", std::vector<double>{1.0});
    if (ladder.empty()) throw ConfigError("levels must be nonempty");
    const std::string solver = sj.value("solver", ladder.size() > 1 ? "patched" : "projected");
    if (n < 1 || n_paths < 1) throw ConfigError("solve.n and solve.n_paths must be >= 1");

    galerkin::PresetParams prm;
    prm.noise_g = sj.value("noise_g", 0.2);
    prm.lipschitz = sj.value("lipschitz", 0.5);
    const auto prob = galerkin::make_preset(require_key(sj, "preset", "solve").get<std::string>(), n, prm);
    const auto x0 = parse_x0(sj, n);
    galerkin::SolveOptions opts;
    opts.blowup_guard = sj.value("blowup_guard", 1e12);

    cylnoise::PathSpec pspec;
    pspec.T = T;
    pspec.steps = std::max(1, static_cast<int>(std::llround(T / dt)));
    pspec.min_level = ladder.front();

    const bool force = sj.value("force", false);
    cylnoise::TruncationDecomposition decomp = cylnoise::decompose(L, weights, ladder.front(), force);

    Stopwatch solve_sw;
    std::vector<galerkin::GalerkinSolution> kept(static_cast<std::size_t>(std::min(write_traj, n_paths)));
    std::vector<char> aborted(static_cast<std::size_t>(n_paths), 0);
    for_each_index(n_paths, cfg.workers, [&](long p) {
        const auto path = cylnoise::sample_path(L, weights, ladder.front(), n, pspec, cfg.master_seed, p);
        galerkin::GalerkinSolution sol =
            solver == "patched"
                ? galerkin::solve_patched(prob.triple, prob.coeffs, L, weights, ladder, path, x0, opts)
                : galerkin::solve_projected(prob.triple, prob.coeffs, path, x0, opts);
        aborted[static_cast<std::size_t>(p)] = sol.aborted ? 1 : 0;
        if (p < write_traj) kept[static_cast<std::size_t>(p)] = std::move(sol);
    });
    manifest.add_timing("solve", solve_sw.ms());

    long n_aborted = 0;
    for (char a : aborted) n_aborted += a;

    for (std::size_t p = 0; p < kept.size(); ++p) {
        const auto& sol = kept[p];
        Csv traj;
        traj.header = {"t"};
        for (int i = 1; i <= prob.triple.dim(); ++i) traj.header.push_back("x_" + std::to_string(i));
        for (int m = 0; m < sol.X.rows; ++m) {
            std::vector<std::string> row{format_double(sol.t[static_cast<std::size_t>(m)])};
            for (int i = 0; i < sol.X.cols; ++i) row.push_back(format_double(sol.X(m, i)));
            traj.add_row(std::move(row));
        }
        manifest.add_output_csv("trajectory_" + std::to_string(p) + ".csv", traj);

        Csv patches;
        patches.header = {"time", "coordinate", "size", "from_level", "to_level"};
        for (const auto& r : sol.patches)
            patches.add_row({format_double(r.time), std::to_string(r.coordinate),
                             format_double(r.size), format_double(r.from_level),
                             format_double(r.to_level)});
        manifest.add_output_csv("patches_" + std::to_string(p) + ".csv", patches);
    }

    json results;
    results["n_paths"] = n_paths;
    results["n_aborted"] = n_aborted;
    if (!kept.empty()) {
        results["v_energy_path0"] = kept[0].v_energy;
        results["h_sup_path0"] = kept[0].h_sup;
        results["patch_count_path0"] = kept[0].patches.size();
        if (kept[0].aborted) results["abort_reason_path0"] = kept[0].abort_reason;
    }

    if (n_paths >= 2 && solver == "projected") {
        Stopwatch energy_sw;
        const auto er = galerkin::energy_monitor(prob.triple, prob.coeffs, L, weights, decomp, n,
                                                 pspec, x0, lambda, n_paths, cfg.master_seed,
                                                 cfg.workers, opts);
        manifest.add_timing("energy_monitor", energy_sw.ms());
        results["energy_lhs"] = er.lhs_mean;
        results["energy_rhs"] = er.rhs_mean;
        results["energy_bias_budget"] = er.bias_budget;
        results["energy_z"] = er.z_score;
        results["v_energy_mean"] = er.v_energy_mean;
        results["h_sup_mean"] = er.h_sup_mean;
    }

    manifest.doc["results"] = results;
    manifest.add_output_json("solve_report.json", results);
    manifest.add_timing("total", total.ms());
    manifest.write();
    return n_aborted > 0 ? kBlowUp : kOk;
}

/// converge: sweep (n, dt); deterministic rows compare against the analytic
/// heat semigroup, stochastic rows report energy statistics.
inline int cmd_converge(const ExperimentConfig& cfg) {
    RunManifest manifest("converge", cfg);
    Stopwatch total;
    const json& cj = require_key(cfg.root, "converge", "config");
    const auto n_values = require_key(cj, "n_values", "converge").get<std::vector<int>>();
    const auto dt_values = require_key(cj, "dt_values", "converge").get<std::vector<double>>();
    const double T = require_positive(cj, "T", "converge");
    const bool zero_noise = cj.value("zero_noise", true);
    const long n_paths = cj.value("n_paths", 200L);
    const std::string preset = cj.value("preset", std::string("heat-additive"));

    std::optional<cylnoise::ClosedFormSpec> model;
    std::optional<cylnoise::DiagonalCylindricalLevy> L;
    std::optional<cylnoise::WeightSequence> weights;
    if (!zero_noise) {
        model = parse_model(cfg);
        L = cylnoise::DiagonalCylindricalLevy::closed_form(*model);
        weights = parse_weights(cfg, *model);
    }

    Csv table;
    table.header = {"n", "dt", "paths", "det_error", "ratio_vs_prev_dt", "v_energy", "h_sup"};
    for (int n : n_values) {
        galerkin::PresetParams prm;
        prm.noise_g = cj.value("noise_g", 0.2);
        const auto prob = galerkin::make_preset(preset, n, prm);
        const auto x0 = parse_x0(cj, n);
        double prev_err = 0.0;
        bool have_prev = false;
        for (double dt : dt_values) {
            const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
            if (zero_noise) {
                // deterministic run: zero-noise path (finite activity, rate 0)
                auto zero_spec = cylnoise::ClosedFormSpec{};
                zero_spec.family = levy1d::MeasureKind::FiniteActivity;
                zero_spec.fa_rate = 0.0;
                zero_spec.fa_law = std::make_shared<levy1d::TabulatedLaw>(
                    levy1d::TabulatedLaw({0.0, 1.0}, {0.0, 0.0}));
                const auto Lz = cylnoise::DiagonalCylindricalLevy::closed_form(zero_spec);
                const auto wz = cylnoise::WeightSequence::constant(1.0);
                cylnoise::PathSpec ps;
                ps.T = T;
                ps.steps = steps;
                const auto path = cylnoise::sample_path(Lz, wz, 1.0, n, ps, cfg.master_seed, 0);
                const auto sol = galerkin::solve_projected(prob.triple, prob.coeffs, path, x0);
                // analytic heat semigroup per mode
                double err = 0.0;
                for (int m = 0; m < sol.X.rows; ++m) {
                    double e2 = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double exact =
                            x0[static_cast<std::size_t>(i)] *
                            std::exp(-prob.triple.mu[static_cast<std::size_t>(i)] *
                                     sol.t[static_cast<std::size_t>(m)]);
                        const double diff = sol.X(m, i) - exact;
                        e2 += diff * diff;
                    }
                    err = std::max(err, std::sqrt(e2));
                }
                const double ratio = have_prev && err > 0.0 ? prev_err / err : 0.0;
                table.add_row({std::to_string(n), format_double(dt), "1", format_double(err),
                               format_double(ratio), format_double(sol.v_energy),
                               format_double(sol.h_sup)});
                prev_err = err;
                have_prev = true;
            } else {
                std::vector<double> ladder = cfg.root.value("levels", std::vector<double>{1.0});
                const auto decomp = cylnoise::decompose(*L, *weights, ladder.front(),
                                                        cj.value("force", false));
                cylnoise::PathSpec ps;
                ps.T = T;
                ps.steps = steps;
                ps.min_level = ladder.front();
                const auto er = galerkin::energy_monitor(prob.triple, prob.coeffs, *L, *weights,
                                                         decomp, n, ps, x0, 0.0, n_paths,
                                                         cfg.master_seed, cfg.workers);
                table.add_row({std::to_string(n), format_double(dt), std::to_string(n_paths), "0",
                               "0", format_double(er.v_energy_mean), format_double(er.h_sup_mean)});
            }
        }
    }
    manifest.add_output_csv("converge.csv", table);
    manifest.doc["results"]["rows"] = table.row_count();
    manifest.add_timing("total", total.ms());
    manifest.write();
    return kOk;
}

inline int dispatch(const std::string& command, const ExperimentConfig& cfg) {
    if (command == "check") return cmd_check(cfg);
    if (command == "dichotomy") return cmd_dichotomy(cfg);
    if (command == "solve") return cmd_solve(cfg);
    if (command == "converge") return cmd_converge(cfg);
    throw ConfigError("unknown command '" + command + "'");
}

} // namespace cylsde::cli
