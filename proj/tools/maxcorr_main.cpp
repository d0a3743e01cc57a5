// Command-line front end: gaussian closed forms, the semi-discrete solver,
// multivariate expected shortfall, and the property-check suites. JSON goes
// to stdout, diagnostics to stderr.
//
// Exit codes: 0 success, 2 input/validation error, 3 numerical error,
// 4 solver non-convergence, 5 check-suite failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maxcorr/maxcorr.hpp"

using json = nlohmann::json;
using namespace maxcorr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitCheckFailed = 5;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("MAXCORR_SEED")) {
        try {
            return static_cast<std::uint64_t>(std::stoull(env));
        } catch (...) {
            throw ValidationError("MAXCORR_SEED is not a valid integer");
        }
    }
    return 12345;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const std::exception& e) {
        throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw ValidationError("config file must hold a JSON object");
    return cfg;
}

transport::StepRule parse_step(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) args.push_back(std::stod(tok));
    }
    if (kind == "fixed") {
        if (args.size() != 1) throw ValidationError("--step fixed:EPS");
        return transport::StepRule::fixed(args[0]);
    }
    if (kind == "decay") {
        if (args.size() != 2) throw ValidationError("--step decay:EPS0,EXPONENT");
        return transport::StepRule::decay(args[0], args[1]);
    }
    if (kind == "adapt" || kind == "adaptive") {
        if (args.size() > 3) throw ValidationError("--step adapt[:EPS0[,SHRINK[,GROW]]]");
        transport::StepRule r = transport::StepRule::adaptive();
        if (args.size() > 0) r.eps0 = args[0];
        if (args.size() > 1) r.shrink = args[1];
        if (args.size() > 2) r.grow = args[2];
        return r;
    }
    throw ValidationError("unknown step rule '" + kind + "' (fixed | decay | adapt)");
}

void attach_meta(json& out, bool no_meta) {
    if (no_meta) return;
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
    out["meta"] = {{"tool", "maxcorr"}, {"unix_time", secs.count()}};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json report_to_json(const transport::SolveReport& rep, const EmpiricalDistribution& target) {
    json j;
    j["converged"] = rep.converged;
    j["iterations"] = rep.iterations;
    j["residual"] = rep.residual;
    j["rho"] = rep.risk_value;
    j["primal_value"] = rep.primal_value;
    j["dual_value"] = rep.dual_value;
    j["duality_gap"] = rep.duality_gap;
    j["weights"] = std::vector<double>(rep.weights.values.data(),
                                       rep.weights.values.data() + rep.weights.values.size());
    json cells;
    cells["masses"] = std::vector<double>(rep.cell_stats.masses.data(),
                                          rep.cell_stats.masses.data() + rep.cell_stats.masses.size());
    json barys = json::array();
    for (Eigen::Index k = 0; k < rep.cell_stats.barycenters.rows(); ++k) {
        if (rep.cell_stats.defined[static_cast<std::size_t>(k)]) {
            json row = json::array();
            for (Eigen::Index c = 0; c < rep.cell_stats.barycenters.cols(); ++c)
                row.push_back(rep.cell_stats.barycenters(k, c));
            barys.push_back(row);
        } else {
            barys.push_back(nullptr);
        }
    }
    cells["barycenters"] = barys;
    cells["objective"] = rep.cell_stats.objective;
    cells["sample_count"] = rep.cell_stats.sample_count;
    cells["seed"] = rep.cell_stats.seed;
    j["cell_stats"] = cells;
    j["objective_trace"] = rep.objective_trace;
    j["residual_trace"] = rep.residual_trace;
    j["warnings"] = rep.warnings;
    j["target"] = {{"atoms", target.size()}, {"dim", target.dim()}};
    return j;
}

struct SolveArgs {
    std::string baseline;
    std::string target_file;
    std::string sigma_u_file;
    std::string baseline_file;
    std::string step_spec;
    std::string dump_partition;
    std::string dump_trace;
    std::string config_file;
    double alpha = 0.5;
    std::int64_t samples = 100000;
    std::uint64_t seed = 0;
    double tol = 1e-3;
    int max_iters = 2000;
    int threads = 0;
    int partition_grid = 0;
    bool resample = false;
    bool no_meta = false;
    bool verbose = false;
};

BaselineMeasure make_baseline(const std::string& kind, Eigen::Index dim,
                              const std::string& sigma_u_file, double alpha,
                              const std::string& baseline_file) {
    if (kind == "cube") return BaselineMeasure::uniform_cube(dim);
    if (kind == "gauss") {
        if (sigma_u_file.empty())
            throw ValidationError("--baseline gauss needs --sigma-u FILE");
        return BaselineMeasure::gaussian(csv::read_covariance(sigma_u_file));
    }
    if (kind == "bernoulli") return BaselineMeasure::bernoulli_vector(dim, alpha);
    if (kind == "file") {
        if (baseline_file.empty())
            throw ValidationError("--baseline file needs --baseline-file FILE");
        return BaselineMeasure::empirical(csv::read_empirical(baseline_file));
    }
    throw ValidationError("unknown baseline '" + kind + "' (cube | gauss | bernoulli | file)");
}

int cmd_gaussian(const std::string& sigma_u_file, const std::string& sigma_x_file,
                 const std::string& sigma_y_file, bool cross, bool no_meta) {
    const Eigen::MatrixXd sigma_u = csv::read_covariance(sigma_u_file);
    const Eigen::MatrixXd sigma_x = csv::read_covariance(sigma_x_file);
    const double rho = gaussian::max_corr_gaussian(sigma_u, sigma_x);
    const Eigen::MatrixXd ax = gaussian::brenier_map_gaussian(sigma_u, sigma_x);
    const double residual = (ax * sigma_u * ax - sigma_x).cwiseAbs().maxCoeff() /
                            (1.0 + sigma_x.cwiseAbs().maxCoeff());
    json out;
    out["rho"] = rho;
    out["a_x_residual"] = residual;
    out["dims"] = sigma_u.rows();
    if (!sigma_y_file.empty() && cross) {
        const Eigen::MatrixXd sigma_y = csv::read_covariance(sigma_y_file);
        out["cross_cov"] = matrix_to_json(gaussian::comonotone_cross_cov(sigma_u, sigma_x, sigma_y));
        out["rho_y"] = gaussian::max_corr_gaussian(sigma_u, sigma_y);
    }
    attach_meta(out, no_meta);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_solve(const SolveArgs& a) {
    const EmpiricalDistribution target = csv::read_empirical(a.target_file);
    const BaselineMeasure baseline =
        make_baseline(a.baseline, target.dim(), a.sigma_u_file, a.alpha, a.baseline_file);

    transport::SolveConfig cfg;
    cfg.sample_count = a.samples;
    cfg.seed = a.seed;
    cfg.tol_residual = a.tol;
    cfg.max_iters = a.max_iters;
    cfg.threads = a.threads;
    cfg.resample_each_iter = a.resample;
    if (!a.step_spec.empty()) cfg.step = parse_step(a.step_spec);

    const auto res = transport::max_corr_semidiscrete(baseline, target, cfg);
    const auto& rep = res.report;

    if (a.verbose) {
        for (std::size_t i = 0; i < rep.objective_trace.size(); ++i)
            std::cerr << "iter " << i << " objective " << rep.objective_trace[i]
                      << " residual " << rep.residual_trace[i] << "\n";
    }
    if (!a.dump_trace.empty())
        csv::write_trace(a.dump_trace, rep.objective_trace, rep.residual_trace);
    if (!a.dump_partition.empty()) {
        Eigen::MatrixXd pts;
        if (a.partition_grid > 1 && baseline.kind == BaselineMeasure::Kind::UniformCube) {
            // regular grid on the cube, row-major over the last axis fastest
            const Eigen::Index d = target.dim();
            const int g = a.partition_grid;
            Eigen::Index total = 1;
            for (Eigen::Index i = 0; i < d; ++i) total *= g;
            pts.resize(total, d);
            for (Eigen::Index r = 0; r < total; ++r) {
                Eigen::Index rem = r;
                for (Eigen::Index i = d - 1; i >= 0; --i) {
                    pts(r, i) = (static_cast<double>(rem % g) + 0.5) / g;
                    rem /= g;
                }
            }
        } else {
            // fresh validation sample, distinct stream from the solve
            pts = sample_baseline(baseline, cfg.sample_count, cfg.seed, 1);
        }
        const auto assignment = transport::assign_cells(target, rep.weights, pts, cfg.threads);
        csv::write_partition(a.dump_partition, pts, assignment);
    }

    json out = report_to_json(rep, target);
    attach_meta(out, a.no_meta);
    std::cout << out.dump(2) << "\n";
    return rep.converged ? kExitOk : kExitNoConvergence;
}

int cmd_es(const std::string& target_file, double alpha, bool no_meta) {
    const EmpiricalDistribution target = csv::read_empirical(target_file);
    const auto res = risk::expected_shortfall_mv(target, alpha);
    json out;
    out["rho"] = res.value;
    out["cutoff_c"] = res.cutoff;
    out["boundary_fraction"] = res.boundary_fraction;
    out["alpha"] = alpha;
    attach_meta(out, no_meta);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_cov(const std::string& target_file, bool no_meta) {
    const auto table = csv::read_points(target_file);
    json out;
    out["covariance"] = matrix_to_json(gaussian::sample_covariance(table.points));
    out["dims"] = table.points.cols();
    out["rows"] = table.points.rows();
    attach_meta(out, no_meta);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check suites

struct SuiteRunner {
    json checks = json::array();
    bool all_pass = true;

    void add(const std::string& name, bool pass, double gap, double tol,
             const std::string& detail) {
        checks.push_back({{"check", name},
                          {"pass", pass},
                          {"gap", gap},
                          {"tolerance", tol},
                          {"detail", detail}});
        all_pass = all_pass && pass;
    }

    // Runs a check body, converting exceptions into failed verdicts so the
    // whole suite always reports.
    template <typename F>
    void guarded(const std::string& name, F&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            add(name, false, std::numeric_limits<double>::quiet_NaN(), 0.0,
                std::string("error: ") + e.what());
        }
    }
};

Eigen::MatrixXd random_spd(Eigen::Index d, std::uint64_t seed, std::uint64_t stream) {
    Eigen::MatrixXd b(d, d);
    std::uint64_t ctr = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            b(i, j) = 2.0 * rng::uniform(seed, stream, ctr++) - 1.0;
    return b * b.transpose() + 0.05 * Eigen::MatrixXd::Identity(d, d);
}

void suite_gaussian(SuiteRunner& r, std::uint64_t seed, int trials) {
    r.guarded("gaussian_d2_closed_form", [&] {
        double worst = 0.0;
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
        for (int t = 0; t < trials; ++t) {
            const double s1 = 0.2 + 2.8 * rng::uniform(seed, 10, 3 * t);
            const double s2 = 0.2 + 2.8 * rng::uniform(seed, 10, 3 * t + 1);
            const double co = 1.96 * rng::uniform(seed, 10, 3 * t + 2) - 0.98;
            Eigen::MatrixXd sx(2, 2);
            sx << s1 * s1, co * s1 * s2, co * s1 * s2, s2 * s2;
            const double expected = std::sqrt(s1 * s1 + s2 * s2 +
                                              2.0 * s1 * s2 * std::sqrt(1.0 - co * co));
            worst = std::max(worst, std::abs(gaussian::max_corr_gaussian(id, sx) - expected));
        }
        r.add("gaussian_d2_closed_form", worst <= 1e-10, worst, 1e-10,
              std::to_string(trials) + " random (sigma1, sigma2, corr) triples");
    });
    r.guarded("gaussian_pushforward_identity", [&] {
        double worst = 0.0;
        int t = 0;
        for (const Eigen::Index d : {2, 3, 5}) {
            for (int i = 0; i < trials / 3 + 1; ++i, ++t) {
                const Eigen::MatrixXd su = random_spd(d, seed, 20 + 2 * t);
                const Eigen::MatrixXd sx = random_spd(d, seed, 21 + 2 * t);
                const Eigen::MatrixXd ax = gaussian::brenier_map_gaussian(su, sx);
                const double rel = (ax * su * ax - sx).cwiseAbs().maxCoeff() /
                                   (1.0 + sx.cwiseAbs().maxCoeff());
                worst = std::max(worst, rel);
            }
        }
        r.add("gaussian_pushforward_identity", worst <= 1e-8, worst, 1e-8,
              "A_X Sigma_U A_X = Sigma_X, d in {2,3,5}");
    });
    r.guarded("gaussian_comonotone_additivity", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::MatrixXd su = random_spd(2, seed, 100 + 3 * t);
            const Eigen::MatrixXd sx = random_spd(2, seed, 101 + 3 * t);
            const Eigen::MatrixXd sy = random_spd(2, seed, 102 + 3 * t);
            const Eigen::MatrixXd m = gaussian::comonotone_cross_cov(su, sx, sy);
            const Eigen::MatrixXd ssum = sx + sy + m + m.transpose();
            const double lhs = gaussian::max_corr_gaussian(su, ssum);
            const double rhs = gaussian::max_corr_gaussian(su, sx) +
                               gaussian::max_corr_gaussian(su, sy);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        r.add("gaussian_comonotone_additivity", worst <= 1e-8, worst, 1e-8,
              "rho of the comonotone sum covariance vs rho(X)+rho(Y)");
    });
    r.guarded("gaussian_scale_equivariance", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::MatrixXd su = random_spd(3, seed, 200 + 2 * t);
            const Eigen::MatrixXd sx = random_spd(3, seed, 201 + 2 * t);
            const double lam = 0.3 + 2.0 * rng::uniform(seed, 11, t);
            const double lhs = gaussian::max_corr_gaussian(su, lam * lam * sx);
            const double rhs = lam * gaussian::max_corr_gaussian(su, sx);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, rhs));
        }
        r.add("gaussian_scale_equivariance", worst <= 1e-10, worst, 1e-10,
              "rho(lambda^2 Sigma) = lambda rho(Sigma)");
    });
    r.guarded("gaussian_comonotonic_verdict", [&] {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
        const Eigen::MatrixXd m = gaussian::comonotone_cross_cov(id, id, id);
        const bool good = gaussian::is_gaussian_comonotonic(id, id, id, m, 1e-9);
        const bool bad = gaussian::is_gaussian_comonotonic(id, id, id, -id, 1e-3);
        r.add("gaussian_comonotonic_verdict", good && !bad, good && !bad ? 0.0 : 1.0, 0.0,
              "constructed pair accepted, countermonotone pair rejected");
    });
    r.guarded("gaussian_location_scale_invariance", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::MatrixXd su = random_spd(2, seed, 300 + 3 * t);
            const Eigen::MatrixXd sx = random_spd(2, seed, 301 + 3 * t);
            const Eigen::MatrixXd sy = random_spd(2, seed, 302 + 3 * t);
            const double lam = 0.4 + 2.0 * rng::uniform(seed, 12, t);
            const Eigen::MatrixXd m1 = gaussian::comonotone_cross_cov(su, sx, sy);
            const Eigen::MatrixXd m2 = gaussian::comonotone_cross_cov(lam * lam * su, sx, sy);
            worst = std::max(worst, (m1 - m2).cwiseAbs().maxCoeff());
        }
        r.add("gaussian_location_scale_invariance", worst <= 1e-9, worst, 1e-9,
              "cross-covariance unchanged under baseline scaling");
    });
}

void suite_oracle(SuiteRunner& r, std::uint64_t seed, int trials) {
    r.guarded("assignment_vs_exhaustive", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng::uniform_index(seed, 40, t, 6));
            const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng::uniform_index(seed, 41, t, 3));
            Eigen::MatrixXd a(n, d), b(n, d);
            std::uint64_t ctr = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < d; ++j) {
                    a(i, j) = rng::uniform(seed, 42 + 2 * t, ctr);
                    b(i, j) = rng::uniform(seed, 43 + 2 * t, ctr);
                    ++ctr;
                }
            const auto src = validate_empirical(a);
            const auto tgt = validate_empirical(b);
            const double ex = oracle::max_corr_assignment(src, tgt, oracle::Method::Exhaustive).value;
            const double lap = oracle::max_corr_assignment(src, tgt, oracle::Method::Lap).value;
            worst = std::max(worst, std::abs(ex - lap));
        }
        r.add("assignment_vs_exhaustive", worst <= 1e-12, worst, 1e-12,
              "shortest-augmenting-path assignment equals full enumeration");
    });
    r.guarded("d1_sorted_agreement", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng::uniform_index(seed, 50, t, 6));
            Eigen::MatrixXd grid(n, 1), tgt(n, 1);
            for (Eigen::Index i = 0; i < n; ++i) {
                grid(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
                tgt(i, 0) = 2.0 * rng::uniform(seed, 51 + t, static_cast<std::uint64_t>(i)) - 1.0;
            }
            const auto source = validate_empirical(grid);
            const auto target = validate_empirical(tgt);
            const double via_assignment = oracle::max_corr_assignment(source, target).value;
            const double via_quantile = oracle::max_corr_1d_quantile(
                oracle::Quantile1D::empirical(source), target);
            worst = std::max(worst, std::abs(via_assignment - via_quantile));
        }
        r.add("d1_sorted_agreement", worst <= 1e-10, worst, 1e-10,
              "assignment vs quantile-block oracle on 1d grids");
    });
    r.guarded("rearrangement_bound", [&] {
        const Eigen::Index n = 5;
        Eigen::MatrixXd u(n, 2), a(n, 2), b(n, 2);
        std::uint64_t ctr = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) {
                u(i, j) = rng::uniform(seed, 60, ctr);
                a(i, j) = rng::uniform(seed, 61, ctr);
                b(i, j) = rng::uniform(seed, 62, ctr);
                ++ctr;
            }
        const auto src = validate_empirical(u);
        const auto ta = validate_empirical(a);
        const auto tb = validate_empirical(b);
        const auto probe = oracle::structure_neutrality_probe(src, ta, tb, 0, seed);
        const double target_sum = probe.rho_a + probe.rho_b;
        const double over = probe.best_found - target_sum;   // must not exceed
        const double gap = std::abs(over);
        r.add("rearrangement_bound", over <= 1e-10 && gap <= 1e-10, gap, 1e-10,
              "exhaustive rearrangements attain and never exceed rho(A)+rho(B)");
    });
    r.guarded("neutrality_constant_target", [&] {
        const Eigen::Index n = 4;
        Eigen::MatrixXd u(n, 1), a(n, 1), b(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            u(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            a(i, 0) = rng::uniform(seed, 70, static_cast<std::uint64_t>(i));
            b(i, 0) = 0.75;  // constant vector: comonotone with everything
        }
        Eigen::MatrixXd bj = b;
        bj(0, 0) = 0.75;  // keep distinctness by a merged validate
        const auto src = validate_empirical(u);
        const auto ta = validate_empirical(a);
        const auto tb = EmpiricalDistribution::validate_merging(
            bj, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
        // probe needs equal sizes; evaluate directly via the assignment value
        Eigen::MatrixXd sums = ta.atoms;
        sums.array() += 0.75;
        const double rho_sum = oracle::max_corr_assignment(
            src, validate_empirical(sums)).value;
        const double rho_a = oracle::max_corr_assignment(src, ta).value;
        const double rho_b = oracle::max_corr_assignment(src, tb).value;
        const double gap = std::abs(rho_sum - rho_a - rho_b);
        r.add("neutrality_constant_target", gap <= 1e-12, gap, 1e-12,
              "adding a constant shifts rho by <mean, c> exactly");
    });
}

void suite_axioms(SuiteRunner& r, std::uint64_t seed, int trials, bool corrupt) {
    transport::SolveConfig cfg;
    cfg.sample_count = corrupt ? 1000 : 40000;
    cfg.seed = seed;
    cfg.tol_residual = corrupt ? 1e-9 : 2e-3;
    cfg.max_iters = corrupt ? 1 : 3000;
    const risk::RiskSolver cube2{BaselineMeasure::uniform_cube(2), cfg};

    auto random_target = [&](Eigen::Index n, Eigen::Index d, std::uint64_t stream) {
        Eigen::MatrixXd atoms(n, d);
        std::uint64_t ctr = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                atoms(i, j) = 2.0 * rng::uniform(seed, stream, ctr++) - 1.0;
        return validate_empirical(atoms);
    };

    r.guarded("translation_invariance", [&] {
        double worst = 0.0;
        for (int t = 0; t < std::min(trials, 3); ++t) {
            const auto target = random_target(5, 2, 500 + t);
            Eigen::VectorXd y(2);
            y << rng::uniform(seed, 510, t), rng::uniform(seed, 511, t);
            const auto rep = risk::check_translation_invariance(cube2, target, y, 1.5, 0.02);
            worst = std::max(worst, rep.gap);
        }
        r.add("translation_invariance", worst <= 0.02, worst, 0.02,
              "rho(X+my) = rho(X) + m <baseline mean, y>, cube baseline");
    });
    r.guarded("positive_homogeneity", [&] {
        double worst = 0.0;
        for (int t = 0; t < std::min(trials, 3); ++t) {
            const auto target = random_target(5, 2, 520 + t);
            const auto rep = risk::check_positive_homogeneity(cube2, target, 2.0, 0.02);
            worst = std::max(worst, rep.gap);
        }
        r.add("positive_homogeneity", worst <= 0.02, worst, 0.02,
              "rho(2X) = 2 rho(X), cube baseline");
    });
    r.guarded("subadditivity", [&] {
        double worst = -1e99;
        for (int t = 0; t < std::min(trials, 3); ++t) {
            const Eigen::Index rows = 6;
            Eigen::MatrixXd xs(rows, 2), ys(rows, 2);
            std::uint64_t ctr = 0;
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < 2; ++j) {
                    xs(i, j) = 2.0 * rng::uniform(seed, 530 + t, ctr) - 1.0;
                    ys(i, j) = 2.0 * rng::uniform(seed, 531 + t, ctr) - 1.0;
                    ++ctr;
                }
            const auto rep = risk::check_subadditivity(cube2, xs, ys, 0.02);
            worst = std::max(worst, rep.gap);
        }
        r.add("subadditivity", worst <= 0.02, worst, 0.02,
              "rho(X+Y) <= rho(X) + rho(Y) + tol on paired samples");
    });
    r.guarded("cone_monotonicity", [&] {
        const auto orthant = risk::Cone::from(Eigen::MatrixXd::Identity(2, 2));
        Eigen::MatrixXd neg(1, 2);
        neg << -1.0, 0.0;
        const auto bad_cone = risk::Cone::from(neg);
        const auto good = risk::check_cone_monotonicity(
            BaselineMeasure::uniform_cube(2), orthant, 0.02, cfg, corrupt ? 1 : 2, seed);
        const auto bad = risk::check_cone_monotonicity(
            BaselineMeasure::uniform_cube(2), bad_cone, 0.02, cfg, 0, seed);
        const auto gauss = risk::check_cone_monotonicity(
            BaselineMeasure::gaussian(Eigen::MatrixXd::Identity(2, 2)), orthant, 0.02, cfg, 0, seed);
        const bool pass = good.condition_holds && good.probe_pass && !bad.condition_holds &&
                          !gauss.condition_holds;
        r.add("cone_monotonicity", pass, pass ? 0.0 : 1.0, 0.02,
              "orthant vs cube support holds; negative direction and full "
              "Gaussian support fail the polar-cone condition");
    });
    r.guarded("law_invariance_bitexact", [&] {
        Eigen::MatrixXd atoms(4, 2);
        atoms << 0.1, 0.9, 0.8, 0.2, 0.4, 0.4, 0.6, 0.7;
        Eigen::MatrixXd permuted(4, 2);
        permuted << 0.6, 0.7, 0.1, 0.9, 0.8, 0.2, 0.4, 0.4;
        const auto t1 = validate_empirical(atoms);
        const auto t2 = validate_empirical(permuted);
        const auto r1 = transport::tatonnement(BaselineMeasure::uniform_cube(2), t1, cfg);
        const auto r2 = transport::tatonnement(BaselineMeasure::uniform_cube(2), t2, cfg);
        const bool same = r1.risk_value == r2.risk_value && r1.residual == r2.residual &&
                          r1.weights.values == r2.weights.values;
        r.add("law_invariance_bitexact", same, same ? 0.0 : 1.0, 0.0,
              "permuting input rows leaves the report bit-identical");
    });
    r.guarded("comonotone_additivity", [&] {
        const auto p = random_target(3, 2, 540);
        const auto q = random_target(3, 2, 541);
        const auto rep = risk::check_comonotone_additivity(
            BaselineMeasure::uniform_cube(2), p, q, cfg, 0.05);
        r.add("comonotone_additivity", rep.pass, rep.gap, rep.tol, rep.detail);
    });
    r.guarded("es_matches_bernoulli_oracle", [&] {
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const auto target = random_target(6, 2, 550 + t);
            const double alpha = 0.05 + 0.9 * rng::uniform(seed, 560, t);
            Eigen::MatrixXd sums = target.atoms.rowwise().sum();
            const auto sum_dist =
                EmpiricalDistribution::validate_merging(sums, target.weights);
            const double via_oracle = alpha * oracle::max_corr_1d_quantile(
                oracle::Quantile1D::bernoulli(alpha), sum_dist);
            const double via_es = risk::expected_shortfall_mv(target, alpha).value;
            worst = std::max(worst, std::abs(via_oracle - via_es));
        }
        r.add("es_matches_bernoulli_oracle", worst <= 1e-10, worst, 1e-10,
              "prorated tail sum equals the Bernoulli quantile integral");
    });
    r.guarded("convex_measure_dominance", [&] {
        const auto target = random_target(5, 2, 570);
        risk::ScenarioFamily family = risk::ScenarioFamily::validate({
            {BaselineMeasure::uniform_cube(2), 0.0},
            {BaselineMeasure::bernoulli_vector(2, 0.5), 0.1},
        });
        const auto res = risk::convex_measure(target, family, cfg);
        double worst = 0.0;
        bool dominated = true;
        for (const auto& s : res.scenarios) {
            if (!s.ok) continue;
            if (s.penalized > res.value + 1e-12) dominated = false;
            worst = std::max(worst, s.penalized - res.value);
        }
        r.add("convex_measure_dominance", dominated, worst, 1e-12,
              "sup value dominates every penalized scenario");
    });
}

int cmd_check(const std::string& suite, std::uint64_t seed, int trials, bool corrupt,
              bool no_meta) {
    SuiteRunner runner;
    if (suite == "gaussian") {
        suite_gaussian(runner, seed, std::max(trials, 5));
    } else if (suite == "oracle") {
        suite_oracle(runner, seed, std::max(trials, 5));
    } else if (suite == "axioms") {
        suite_axioms(runner, seed, std::max(trials, 3), corrupt);
    } else {
        throw ValidationError("unknown suite '" + suite + "' (axioms | oracle | gaussian)");
    }
    json out;
    out["suite"] = suite;
    out["checks"] = runner.checks;
    out["all_pass"] = runner.all_pass;
    attach_meta(out, no_meta);
    std::cout << out.dump(2) << "\n";
    return runner.all_pass ? kExitOk : kExitCheckFailed;
}

void emit_error(const std::string& type, const std::string& message) {
    json err;
    err["error"] = message;
    err["type"] = type;
    std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maximal correlation risk measures: gaussian closed forms, "
                 "semi-discrete transport solver, expected shortfall, check suites"};
    app.require_subcommand(1);

    // gaussian ---------------------------------------------------------------
    auto* g = app.add_subcommand("gaussian", "closed-form value and transport map for "
                                             "centered Gaussian risks");
    std::string g_sigma_u, g_sigma_x, g_sigma_y;
    bool g_cross = false, g_no_meta = false;
    g->add_option("--sigma-u", g_sigma_u, "baseline covariance CSV")->required();
    g->add_option("--sigma-x", g_sigma_x, "risk covariance CSV")->required();
    g->add_option("--sigma-y", g_sigma_y, "second risk covariance CSV");
    g->add_flag("--cross", g_cross, "emit the comonotone cross-covariance");
    g->add_flag("--no-meta", g_no_meta, "omit run metadata from the JSON");

    // solve ------------------------------------------------------------------
    auto* s = app.add_subcommand("solve", "semi-discrete transport solve of a discrete "
                                          "target against a baseline");
    SolveArgs sa;
    s->add_option("--baseline", sa.baseline, "cube | gauss | bernoulli | file")->required();
    s->add_option("--target", sa.target_file, "target atoms CSV")->required();
    s->add_option("--alpha", sa.alpha, "Bernoulli baseline level");
    s->add_option("--sigma-u", sa.sigma_u_file, "Gaussian baseline covariance CSV");
    s->add_option("--baseline-file", sa.baseline_file, "empirical baseline atoms CSV");
    s->add_option("--samples", sa.samples, "Monte Carlo sample count");
    s->add_option("--seed", sa.seed, "RNG seed");
    s->add_option("--tol", sa.tol, "residual stopping threshold");
    s->add_option("--max-iters", sa.max_iters, "iteration cap");
    s->add_option("--step", sa.step_spec, "fixed:E | decay:E,X | adapt[:E[,S[,G]]]");
    s->add_option("--threads", sa.threads, "worker threads (0 = auto)");
    s->add_option("--dump-partition", sa.dump_partition, "write cell membership CSV");
    s->add_option("--partition-grid", sa.partition_grid,
                  "use a regular grid of this many points per axis for the dump");
    s->add_option("--dump-trace", sa.dump_trace, "write iteration trace CSV");
    s->add_option("--config", sa.config_file, "JSON config merged under explicit flags");
    s->add_flag("--resample", sa.resample, "fresh sample each iteration");
    s->add_flag("--no-meta", sa.no_meta, "omit run metadata from the JSON");
    s->add_flag("--verbose", sa.verbose, "iteration log on stderr");

    // es ---------------------------------------------------------------------
    auto* e = app.add_subcommand("es", "multivariate expected shortfall of the "
                                       "coordinate sum");
    std::string e_target;
    double e_alpha = 0.5;
    bool e_no_meta = false;
    e->add_option("--target", e_target, "target atoms CSV")->required();
    e->add_option("--alpha", e_alpha, "tail level in (0,1)")->required();
    e->add_flag("--no-meta", e_no_meta, "omit run metadata from the JSON");

    // check ------------------------------------------------------------------
    auto* c = app.add_subcommand("check", "run a property suite and report verdicts");
    std::string c_suite;
    std::uint64_t c_seed = 0;
    int c_trials = 0;
    bool c_corrupt = false, c_no_meta = false;
    c->add_option("--suite", c_suite, "axioms | oracle | gaussian")->required();
    c->add_option("--seed", c_seed, "RNG seed");
    c->add_option("--trials", c_trials, "instances per check");
    c->add_flag("--corrupt-solver", c_corrupt, "test hook: cripple the solver config")
        ->group("");  // hidden
    c->add_flag("--no-meta", c_no_meta, "omit run metadata from the JSON");

    // cov --------------------------------------------------------------------
    auto* v = app.add_subcommand("cov", "sample covariance of a points CSV");
    std::string v_target;
    bool v_no_meta = false;
    v->add_option("--target", v_target, "points CSV")->required();
    v->add_flag("--no-meta", v_no_meta, "omit run metadata from the JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        if (ex.get_exit_code() == 0) return app.exit(ex);  // --help
        std::stringstream msg;
        msg << ex.what();
        emit_error("validation", msg.str());
        return kExitValidation;
    }

    try {
        if (*g) return cmd_gaussian(g_sigma_u, g_sigma_x, g_sigma_y, g_cross, g_no_meta);
        if (*s) {
            const json cfg = load_config(sa.config_file);
            if (!s->count("--samples") && cfg.contains("samples"))
                sa.samples = cfg["samples"].get<std::int64_t>();
            if (!s->count("--tol") && cfg.contains("tol")) sa.tol = cfg["tol"].get<double>();
            if (!s->count("--max-iters") && cfg.contains("max_iters"))
                sa.max_iters = cfg["max_iters"].get<int>();
            if (!s->count("--step") && cfg.contains("step"))
                sa.step_spec = cfg["step"].get<std::string>();
            if (!s->count("--threads") && cfg.contains("threads"))
                sa.threads = cfg["threads"].get<int>();
            if (!s->count("--alpha") && cfg.contains("alpha"))
                sa.alpha = cfg["alpha"].get<double>();
            if (!s->count("--resample") && cfg.contains("resample"))
                sa.resample = cfg["resample"].get<bool>();
            if (!s->count("--seed")) {
                sa.seed = cfg.contains("seed") ? cfg["seed"].get<std::uint64_t>()
                                               : default_seed();
            }
            return cmd_solve(sa);
        }
        if (*e) return cmd_es(e_target, e_alpha, e_no_meta);
        if (*c) {
            if (!c->count("--seed")) c_seed = default_seed();
            return cmd_check(c_suite, c_seed, c_trials, c_corrupt, c_no_meta);
        }
        if (*v) return cmd_cov(v_target, v_no_meta);
    } catch (const ValidationError& ex) {
        emit_error("validation", ex.what());
        return kExitValidation;
    } catch (const NumericalError& ex) {
        emit_error("numerical", ex.what());
        return kExitNumerical;
    } catch (const std::exception& ex) {
        emit_error("internal", ex.what());
        return kExitNumerical;
    }
    return kExitOk;
}
