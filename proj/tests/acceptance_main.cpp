// Acceptance suite: one line per criterion, [PASS]/[FAIL] with the measured
// gap, the pinned tolerance and the elapsed time. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "maxcorr/maxcorr.hpp"
#include "test_helpers.hpp"

using namespace maxcorr;
using test_helpers::random_spd;
using test_helpers::random_target;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

// 1. d=2 closed form against the trace formula, 100 random triples, 1e-10.
Outcome criterion_gaussian_closed_form() {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const double s1 = 0.2 + 2.8 * rng::uniform(101, 0, 3 * t);
        const double s2 = 0.2 + 2.8 * rng::uniform(101, 0, 3 * t + 1);
        const double co = 1.96 * rng::uniform(101, 0, 3 * t + 2) - 0.98;
        Eigen::MatrixXd sx(2, 2);
        sx << s1 * s1, co * s1 * s2, co * s1 * s2, s2 * s2;
        const double expected =
            std::sqrt(s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * std::sqrt(1.0 - co * co));
        worst = std::max(worst, std::abs(gaussian::max_corr_gaussian(id, sx) - expected));
    }
    return {worst <= 1e-10, "max |trace formula - closed form| = " + std::to_string(worst) +
                                " over 100 triples (tol 1e-10)"};
}

// 2. A_X Sigma_U A_X = Sigma_X within 1e-8 relative, d in {2,3,5}.
Outcome criterion_pushforward() {
    double worst = 0.0;
    std::uint64_t t = 0;
    for (const Eigen::Index d : {2, 3, 5}) {
        for (int i = 0; i < 34; ++i, ++t) {
            const Eigen::MatrixXd su = random_spd(d, 102, 2 * t);
            const Eigen::MatrixXd sx = random_spd(d, 102, 2 * t + 1);
            const Eigen::MatrixXd ax = gaussian::brenier_map_gaussian(su, sx);
            const double rel = (ax * su * ax - sx).cwiseAbs().maxCoeff() /
                               (1.0 + sx.cwiseAbs().maxCoeff());
            worst = std::max(worst, rel);
        }
    }
    return {worst <= 1e-8, "max relative push-forward residual = " + std::to_string(worst) +
                               " over 102 pairs (tol 1e-8)"};
}

// 3. Gaussian comonotone additivity within 1e-8 on 50 random pairs.
Outcome criterion_gaussian_additivity() {
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        const Eigen::MatrixXd su = random_spd(2, 103, 3 * t);
        const Eigen::MatrixXd sx = random_spd(2, 103, 3 * t + 1);
        const Eigen::MatrixXd sy = random_spd(2, 103, 3 * t + 2);
        const Eigen::MatrixXd m = gaussian::comonotone_cross_cov(su, sx, sy);
        const double lhs = gaussian::max_corr_gaussian(su, sx + sy + m + m.transpose());
        const double rhs =
            gaussian::max_corr_gaussian(su, sx) + gaussian::max_corr_gaussian(su, sy);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return {worst <= 1e-8, "max additivity gap = " + std::to_string(worst) +
                               " over 50 pairs (tol 1e-8)"};
}

// 4. Solver vs 1d quantile oracle, 10 random instances, tol max(1e-3, 3/sqrt(N)).
Outcome criterion_solver_vs_1d_oracle() {
    const std::int64_t big_n = 100000;
    const double tol = std::max(1e-3, 3.0 / std::sqrt(static_cast<double>(big_n)));
    double worst = 0.0;
    int converged = 0;
    for (std::uint64_t t = 0; t < 10; ++t) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng::uniform_index(104, t, 0, 19));
        EmpiricalDistribution target;
        if (t % 2 == 0) {
            target = random_target(n, 1, 105, t);
        } else {
            target = EmpiricalDistribution::validate(
                test_helpers::random_points(n, 1, 105, t),
                test_helpers::random_weights(n, 106, t));
        }
        transport::SolveConfig cfg;
        cfg.sample_count = big_n;
        cfg.seed = 1000 + t;
        cfg.tol_residual = 1e-3;
        cfg.max_iters = 5000;
        cfg.step = transport::StepRule::adaptive(0.0, 0.5, 1.2);
        const auto res =
            transport::max_corr_semidiscrete(BaselineMeasure::uniform_cube(1), target, cfg);
        if (res.report.converged) ++converged;
        const double oracle_value =
            oracle::max_corr_1d_quantile(oracle::Quantile1D::uniform(), target);
        worst = std::max(worst, std::abs(res.risk_value - oracle_value));
    }
    return {worst <= tol && converged == 10,
            "max |solver - quantile oracle| = " + std::to_string(worst) + " (tol " +
                std::to_string(tol) + "), " + std::to_string(converged) + "/10 converged"};
}

// 5. Solver vs gaussian closed form: rho within 5% of 3 for N(0, diag(1,4)).
Outcome criterion_solver_vs_gaussian() {
    Eigen::MatrixXd sx(2, 2);
    sx << 1.0, 0.0, 0.0, 4.0;
    const auto target =
        validate_empirical(sample_baseline(BaselineMeasure::gaussian(sx), 2000, 99));
    transport::SolveConfig cfg;
    cfg.sample_count = 50000;
    cfg.seed = 7;
    cfg.tol_residual = 2e-3;
    cfg.max_iters = 400;
    cfg.step = transport::StepRule::adaptive(0.05, 0.5, 1.3);
    const auto res = transport::max_corr_semidiscrete(
        BaselineMeasure::gaussian(Eigen::MatrixXd::Identity(2, 2)), target, cfg);
    const double rel = std::abs(res.risk_value - 3.0) / 3.0;
    return {rel <= 0.05, "rho = " + std::to_string(res.risk_value) +
                             ", relative error vs 3 = " + std::to_string(rel) +
                             " (tol 0.05), converged = " +
                             (res.report.converged ? "yes" : "no")};
}

// 6. Appendix-scale partitions: 7 and 27 uniform atoms, residual <= 1e-2,
//    no empty cells, partition dump written.
Outcome criterion_partition(int atoms, const std::string& dump_name) {
    const auto target = random_target(atoms, 2, 107, static_cast<std::uint64_t>(atoms));
    transport::SolveConfig cfg;
    cfg.sample_count = 100000;
    cfg.seed = 21;
    cfg.tol_residual = 1e-2;
    cfg.max_iters = 3000;
    const auto base = BaselineMeasure::uniform_cube(2);
    const auto rep = transport::tatonnement(base, target, cfg);
    bool all_defined = true;
    for (Eigen::Index k = 0; k < target.size(); ++k)
        all_defined = all_defined && rep.cell_stats.defined[static_cast<std::size_t>(k)];

    const auto dump =
        std::filesystem::temp_directory_path() / dump_name;
    const auto pts = sample_baseline(base, 20000, cfg.seed, 1);
    csv::write_partition(dump.string(), pts,
                         transport::assign_cells(target, rep.weights, pts));
    const bool written = std::filesystem::exists(dump) &&
                         std::filesystem::file_size(dump) > 0;
    return {rep.converged && rep.residual <= 1e-2 && all_defined && written,
            std::to_string(atoms) + " atoms: residual = " + std::to_string(rep.residual) +
                " (tol 1e-2), all cells nonempty = " + (all_defined ? "yes" : "no") +
                ", dump " + dump.string()};
}

// 7. ES equivalence with the Bernoulli quantile oracle, 50 targets x 4 levels.
Outcome criterion_es_equivalence() {
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng::uniform_index(108, t, 0, 10));
        const auto target = random_target(n, 2, 109, t, -2.0, 2.0);
        Eigen::MatrixXd sums = target.atoms.rowwise().sum();
        const auto sum_dist = EmpiricalDistribution::validate_merging(sums, target.weights);
        for (const double alpha : {0.01, 0.05, 0.5, 0.95}) {
            const double via_oracle =
                alpha * oracle::max_corr_1d_quantile(oracle::Quantile1D::bernoulli(alpha),
                                                     sum_dist);
            const double via_es = risk::expected_shortfall_mv(target, alpha).value;
            worst = std::max(worst, std::abs(via_es - via_oracle));
        }
    }
    return {worst <= 1e-10, "max |ES - alpha * Bernoulli oracle| = " + std::to_string(worst) +
                                " over 200 cases (tol 1e-10)"};
}

// 8. Structure neutrality: exhaustive rearrangement search attains
//    rho(A) + rho(B) and never exceeds it, n <= 5.
Outcome criterion_structure_neutrality() {
    double worst_attain = 0.0;
    double worst_excess = 0.0;
    std::uint64_t t = 0;
    for (const Eigen::Index d : {1, 2}) {
        for (const Eigen::Index n : {3, 4, 5}) {
            const auto src = random_target(n, d, 110, 3 * t);
            const auto ta = random_target(n, d, 110, 3 * t + 1, -1.0, 1.0);
            const auto tb = random_target(n, d, 110, 3 * t + 2, -1.0, 1.0);
            const auto res = oracle::structure_neutrality_probe(src, ta, tb, 0, 1);
            const double bound = res.rho_a + res.rho_b;
            worst_attain = std::max(worst_attain, std::abs(res.best_found - bound));
            worst_excess = std::max(worst_excess, res.best_found - bound);
            ++t;
        }
    }
    return {worst_attain <= 1e-10 && worst_excess <= 1e-10,
            "max |best - (rho(A)+rho(B))| = " + std::to_string(worst_attain) +
                ", max excess = " + std::to_string(worst_excess) +
                " over 6 exhaustive instances (tol 1e-10)"};
}

// 9. Finite differences of the sampled objective match pi - p within 2e-3.
Outcome criterion_gradient_check() {
    const auto target = random_target(6, 2, 111, 0);
    const auto base = BaselineMeasure::uniform_cube(2);
    transport::SolveConfig cfg;
    cfg.sample_count = 100000;
    cfg.seed = 17;
    const double h = 1e-4;
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 20; ++t) {
        DualWeights w;
        w.values = Eigen::VectorXd(6);
        for (Eigen::Index k = 0; k < 6; ++k)
            w.values[k] = 0.4 * rng::uniform(112, t, static_cast<std::uint64_t>(k));
        const auto stats = transport::cell_stats(base, target, w, cfg);
        for (Eigen::Index k = 0; k < 6; ++k) {
            DualWeights up = w, dn = w;
            up.values[k] += h;
            dn.values[k] -= h;
            const double fd = (transport::objective(base, target, up, cfg) -
                               transport::objective(base, target, dn, cfg)) /
                              (2.0 * h);
            worst = std::max(worst, std::abs(fd - (target.weights[k] - stats.masses[k])));
        }
    }
    return {worst <= 2e-3, "max |finite difference - (pi - p)| = " + std::to_string(worst) +
                               " over 20 weight vectors (tol 2e-3)"};
}

// 10. Axiom suite with pinned tolerances; law invariance bit-exact.
Outcome criterion_axiom_suite() {
    transport::SolveConfig cfg;
    cfg.sample_count = 40000;
    cfg.seed = 23;
    cfg.tol_residual = 2e-3;
    cfg.max_iters = 4000;
    const risk::RiskSolver cube2{BaselineMeasure::uniform_cube(2), cfg};
    std::string detail;
    bool ok = true;

    const double solver_tol = 0.02;  // two solver runs at residual 2e-3, atoms in [-1,1]
    for (std::uint64_t t = 0; t < 3; ++t) {
        const auto target = random_target(5, 2, 113, t, -1.0, 1.0);
        Eigen::VectorXd y(2);
        y << rng::uniform(114, t, 0), rng::uniform(114, t, 1);
        const auto ti = risk::check_translation_invariance(cube2, target, y, 1.5, solver_tol);
        const auto ph = risk::check_positive_homogeneity(cube2, target, 2.0, solver_tol);
        ok = ok && ti.pass && ph.pass;
        if (!ti.pass) detail += " TI gap " + std::to_string(ti.gap) + ";";
        if (!ph.pass) detail += " PH gap " + std::to_string(ph.gap) + ";";
    }

    for (std::uint64_t t = 0; t < 2; ++t) {
        const auto xs = test_helpers::random_points(6, 2, 115, 2 * t, -1.0, 1.0);
        const auto ys = test_helpers::random_points(6, 2, 115, 2 * t + 1, -1.0, 1.0);
        const auto sub = risk::check_subadditivity(cube2, xs, ys, solver_tol);
        ok = ok && sub.pass;
        if (!sub.pass) detail += " subadditivity gap " + std::to_string(sub.gap) + ";";
    }

    const auto orthant = risk::Cone::from(Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd neg(1, 2);
    neg << -1.0, 0.0;
    const auto cone_good = risk::check_cone_monotonicity(BaselineMeasure::uniform_cube(2),
                                                         orthant, solver_tol, cfg, 2, 29);
    const auto cone_bad = risk::check_cone_monotonicity(
        BaselineMeasure::uniform_cube(2), risk::Cone::from(neg), solver_tol, cfg, 0, 29);
    const auto cone_gauss = risk::check_cone_monotonicity(
        BaselineMeasure::gaussian(Eigen::MatrixXd::Identity(2, 2)), orthant, solver_tol,
        cfg, 0, 29);
    if (!(cone_good.condition_holds && cone_good.probe_pass)) {
        ok = false;
        detail += " cone orthant/cube failed;";
    }
    if (cone_bad.condition_holds || cone_gauss.condition_holds) {
        ok = false;
        detail += " cone negative verdicts wrong;";
    }

    // law invariance: permuted input rows give a bit-identical report
    Eigen::MatrixXd atoms(4, 2);
    atoms << 0.2, 0.8, 0.7, 0.1, 0.4, 0.5, 0.9, 0.9;
    Eigen::MatrixXd perm(4, 2);
    perm << 0.9, 0.9, 0.2, 0.8, 0.7, 0.1, 0.4, 0.5;
    const auto r1 =
        transport::tatonnement(BaselineMeasure::uniform_cube(2), validate_empirical(atoms), cfg);
    const auto r2 =
        transport::tatonnement(BaselineMeasure::uniform_cube(2), validate_empirical(perm), cfg);
    const bool law = r1.risk_value == r2.risk_value &&
                     r1.weights.values == r2.weights.values && r1.residual == r2.residual;
    if (!law) {
        ok = false;
        detail += " law invariance not bit-exact;";
    }

    if (detail.empty())
        detail = "TI/PH/subadditivity within 0.02, cone verdicts correct, "
                 "law invariance bit-exact";
    return {ok, detail};
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "gaussian d=2 closed form", 1.0, criterion_gaussian_closed_form},
        {2, "brenier push-forward identity", 1.0, criterion_pushforward},
        {3, "gaussian comonotone additivity", 1.0, criterion_gaussian_additivity},
        {4, "solver vs 1d quantile oracle", 30.0, criterion_solver_vs_1d_oracle},
        {5, "solver vs gaussian closed form", 60.0, criterion_solver_vs_gaussian},
        {6, "partition reproduction (7 atoms)", 60.0,
         [] { return criterion_partition(7, "maxcorr_partition_7.csv"); }},
        {6, "partition reproduction (27 atoms)", 60.0,
         [] { return criterion_partition(27, "maxcorr_partition_27.csv"); }},
        {7, "expected shortfall equivalence", 1.0, criterion_es_equivalence},
        {8, "structure neutrality probe", 30.0, criterion_structure_neutrality},
        {9, "objective gradient check", 30.0, criterion_gradient_check},
        {10, "axiom suite", 60.0, criterion_axiom_suite},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs <= c.budget_seconds;
        const bool pass = out.pass && in_budget;
        if (!pass) ++failures;
        std::printf("[%s] criterion %d: %s — %s [%.2f s, budget %.0f s]\n",
                    pass ? "PASS" : "FAIL", c.id, c.name.c_str(), out.detail.c_str(), secs,
                    c.budget_seconds);
        std::fflush(stdout);
    }
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
