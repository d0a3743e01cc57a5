#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "maxcorr/gaussian.hpp"
#include "maxcorr/oracle.hpp"
#include "maxcorr/transport.hpp"
#include "maxcorr/types.hpp"

// Risk-measure layer on top of the closed forms and the transport solver:
// multivariate expected shortfall, penalized convex measures over finite
// scenario families, and the axiom checkers.

namespace maxcorr::risk {

struct EsResult {
    double value = 0.0;
    double cutoff = 0.0;          // c with P(sum >= c) >= alpha, largest such atom sum
    double boundary_mass = 0.0;   // alpha - P(sum > cutoff), prorated onto the cutoff
    double boundary_fraction = 0.0;  // boundary_mass / P(sum == cutoff)
};

// alpha-expected shortfall of the coordinate sum: E[S 1{S >= c}] with the
// boundary atom included fractionally so that exactly mass alpha is counted.
// This proration is what makes the value match the Bernoulli-baseline
// quantile oracle on discrete inputs.
inline EsResult expected_shortfall_mv(const EmpiricalDistribution& target, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("expected shortfall level must lie in (0,1)");
    const Eigen::Index n = target.size();
    Eigen::VectorXd sums = target.atoms.rowwise().sum();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return sums[a] > sums[b]; });

    double cum = 0.0;
    double cutoff = sums[order.back()];
    for (const Eigen::Index k : order) {
        cum += target.weights[k];
        if (cum >= alpha) {
            cutoff = sums[k];
            break;
        }
    }
    double above_mass = 0.0, above_value = 0.0, at_mass = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (sums[k] > cutoff) {
            above_mass += target.weights[k];
            above_value += target.weights[k] * sums[k];
        } else if (sums[k] == cutoff) {
            at_mass += target.weights[k];
        }
    }
    EsResult res;
    res.cutoff = cutoff;
    res.boundary_mass = alpha - above_mass;
    res.boundary_fraction = at_mass > 0.0 ? res.boundary_mass / at_mass : 0.0;
    res.value = above_value + res.boundary_mass * cutoff;
    return res;
}

// Dispatches rho_mu evaluation: Bernoulli baselines go through the
// expected-shortfall closed form (the baseline takes the value 1/alpha, so
// the correlation is the prorated tail sum scaled by 1/alpha); everything
// else through the transport solver.
struct RiskSolver {
    BaselineMeasure baseline;
    transport::SolveConfig cfg;

    double rho(const EmpiricalDistribution& target) const {
        if (baseline.dim() != target.dim())
            throw ValidationError("baseline and target dimensions differ");
        if (baseline.kind == BaselineMeasure::Kind::BernoulliVector)
            return expected_shortfall_mv(target, baseline.alpha).value / baseline.alpha;
        auto res = transport::max_corr_semidiscrete(baseline, target, cfg);
        if (!res.report.converged)
            throw NumericalError("transport solver did not converge (residual " +
                                 std::to_string(res.report.residual) + ")");
        return res.risk_value;
    }
};

struct Scenario {
    BaselineMeasure mu;
    double penalty = 0.0;
};

struct ScenarioFamily {
    std::vector<Scenario> entries;

    static ScenarioFamily validate(std::vector<Scenario> entries) {
        if (entries.empty()) throw ValidationError("scenario family must be nonempty");
        for (const auto& s : entries)
            if (!std::isfinite(s.penalty) || s.penalty < 0.0)
                throw ValidationError("scenario penalties must be finite and nonnegative");
        ScenarioFamily f;
        f.entries = std::move(entries);
        return f;
    }
};

using RiskDistribution = std::variant<EmpiricalDistribution, GaussianRisk>;

namespace detail_r {

// rho_mu against a single scenario, closed form where one exists.
inline double scenario_rho(const BaselineMeasure& mu, const RiskDistribution& target,
                           const transport::SolveConfig& cfg) {
    if (const auto* g = std::get_if<GaussianRisk>(&target)) {
        if (mu.kind == BaselineMeasure::Kind::Gaussian)
            return gaussian::max_corr_gaussian(mu.sigma, g->covariance);
        if (mu.kind == BaselineMeasure::Kind::BernoulliVector) {
            if (mu.dim() != g->dim())
                throw ValidationError("baseline and target dimensions differ");
            // S = sum of coordinates ~ N(0, 1'Sigma 1); the tail expectation
            // is s*pdf(q_{1-alpha}), scaled by the baseline value 1/alpha.
            const double var = Eigen::VectorXd::Ones(g->dim()).transpose() *
                               g->covariance * Eigen::VectorXd::Ones(g->dim());
            const double s = std::sqrt(var);
            const double q = oracle::detail_o::norm_quantile(1.0 - mu.alpha);
            return s * oracle::detail_o::norm_pdf(q) / mu.alpha;
        }
        throw NumericalError("no closed form for a Gaussian risk against this baseline "
                             "variant; sample it to an empirical target instead");
    }
    const auto& e = std::get<EmpiricalDistribution>(target);
    return RiskSolver{mu, cfg}.rho(e);
}

}  // namespace detail_r

struct ScenarioOutcome {
    bool ok = false;
    double rho = 0.0;
    double penalized = 0.0;
    std::string error;
};

struct ConvexMeasureResult {
    double value = 0.0;
    int attaining = -1;  // lowest index on ties
    std::vector<ScenarioOutcome> scenarios;
};

// sup over the finite family of rho_{mu_i}(X) - penalty_i. A scenario that
// fails is recorded; the call fails only if every scenario does.
inline ConvexMeasureResult convex_measure(const RiskDistribution& target,
                                          const ScenarioFamily& family,
                                          const transport::SolveConfig& cfg) {
    if (family.entries.empty()) throw ValidationError("scenario family must be nonempty");
    ConvexMeasureResult res;
    res.scenarios.resize(family.entries.size());
    std::string last_error = "no scenario evaluated";
    for (std::size_t i = 0; i < family.entries.size(); ++i) {
        auto& out = res.scenarios[i];
        try {
            out.rho = detail_r::scenario_rho(family.entries[i].mu, target, cfg);
            out.penalized = out.rho - family.entries[i].penalty;
            out.ok = true;
            if (res.attaining < 0 || out.penalized > res.value) {
                res.value = out.penalized;
                res.attaining = static_cast<int>(i);
            }
        } catch (const std::exception& e) {
            out.error = e.what();
            last_error = e.what();
        }
    }
    if (res.attaining < 0) throw NumericalError("every scenario failed; last error: " + last_error);
    return res;
}

struct CheckReport {
    std::string name;
    bool pass = false;
    double gap = 0.0;
    double tol = 0.0;
    std::string detail;
};

// rho(X + m*y) == rho(X) + m * <baseline mean, y>.
inline CheckReport check_translation_invariance(const RiskSolver& solver,
                                                const EmpiricalDistribution& target,
                                                const Eigen::VectorXd& y, double m,
                                                double tol) {
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    if (y.size() != target.dim())
        throw ValidationError("shift direction dimension mismatch");
    const double base = solver.rho(target);
    Eigen::MatrixXd shifted = target.atoms;
    shifted.rowwise() += (m * y).transpose();
    const double lhs = solver.rho(EmpiricalDistribution::validate(shifted, target.weights));
    const double rhs = base + m * solver.baseline.mean().dot(y);
    CheckReport rep;
    rep.name = "translation_invariance";
    rep.gap = std::abs(lhs - rhs);
    rep.tol = tol;
    rep.pass = rep.gap <= tol;
    rep.detail = "rho(X+my)=" + std::to_string(lhs) + " vs rho(X)+m<mean,y>=" + std::to_string(rhs);
    return rep;
}

// rho(lambda X) == lambda rho(X), lambda > 0.
inline CheckReport check_positive_homogeneity(const RiskSolver& solver,
                                              const EmpiricalDistribution& target,
                                              double lambda, double tol) {
    if (!(lambda > 0.0)) throw ValidationError("homogeneity factor must be positive");
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    const double base = solver.rho(target);
    const double lhs =
        solver.rho(EmpiricalDistribution::validate(lambda * target.atoms, target.weights));
    CheckReport rep;
    rep.name = "positive_homogeneity";
    rep.gap = std::abs(lhs - lambda * base);
    rep.tol = tol;
    rep.pass = rep.gap <= tol;
    rep.detail = "rho(lambda X)=" + std::to_string(lhs) + " vs lambda rho(X)=" +
                 std::to_string(lambda * base);
    return rep;
}

// rho(X+Y) <= rho(X) + rho(Y) on a row-paired joint sample.
inline CheckReport check_subadditivity(const RiskSolver& solver, const Eigen::MatrixXd& xs,
                                       const Eigen::MatrixXd& ys, double tol) {
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    if (xs.rows() != ys.rows() || xs.cols() != ys.cols())
        throw ValidationError("paired samples must have identical shape");
    const Eigen::Index rows = xs.rows();
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(rows, 1.0 / static_cast<double>(rows));
    const double rx = solver.rho(EmpiricalDistribution::validate_merging(xs, w));
    const double ry = solver.rho(EmpiricalDistribution::validate_merging(ys, w));
    const double rsum = solver.rho(EmpiricalDistribution::validate_merging(xs + ys, w));
    CheckReport rep;
    rep.name = "subadditivity";
    rep.gap = rsum - rx - ry;  // signed; positive means violation
    rep.tol = tol;
    rep.pass = rep.gap <= tol;
    rep.detail = "rho(X+Y)=" + std::to_string(rsum) + " vs rho(X)+rho(Y)=" +
                 std::to_string(rx + ry);
    return rep;
}

// Finitely generated closed convex cone.
struct Cone {
    Eigen::MatrixXd generators;  // one generator per row

    static Cone from(Eigen::MatrixXd gens) {
        if (gens.rows() < 1) throw ValidationError("cone needs at least one generator");
        if (!gens.allFinite()) throw ValidationError("non-finite cone generator");
        bool any = false;
        for (Eigen::Index r = 0; r < gens.rows(); ++r)
            if (gens.row(r).norm() > 0.0) any = true;
        if (!any) throw ValidationError("cone needs at least one nonzero generator");
        Cone c;
        c.generators = std::move(gens);
        return c;
    }
};

struct ConeMonotonicityReport {
    bool condition_holds = false;  // every generator correlates nonnegatively
                                   // with every baseline support point
    bool probe_run = false;
    bool probe_pass = false;
    double worst_gap = 0.0;  // most negative rho(X+z) - rho(X) observed
    double tol = 0.0;
    std::string detail;
};

// The order induced by the cone makes rho_mu monotone exactly when every
// generator has nonnegative inner product with the whole support of mu.
// Checked analytically per variant; when it holds, an empirical probe
// shifts random targets along random cone directions and verifies the risk
// never drops.
inline ConeMonotonicityReport check_cone_monotonicity(const BaselineMeasure& baseline,
                                                      const Cone& cone, double tol,
                                                      const transport::SolveConfig& cfg,
                                                      int probe_trials = 3,
                                                      std::uint64_t seed = 7) {
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    if (cone.generators.cols() != baseline.dim())
        throw ValidationError("cone generator dimension mismatch");
    const Eigen::Index d = baseline.dim();

    ConeMonotonicityReport rep;
    rep.tol = tol;
    rep.condition_holds = true;
    for (Eigen::Index r = 0; r < cone.generators.rows() && rep.condition_holds; ++r) {
        const Eigen::VectorXd g = cone.generators.row(r);
        const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
        switch (baseline.kind) {
            case BaselineMeasure::Kind::UniformCube:
                // min over [0,1]^d of <g,u> is the sum of the negative parts
                rep.condition_holds = g.minCoeff() >= -1e-12 * scale;
                break;
            case BaselineMeasure::Kind::Gaussian:
                // full support: only the zero vector correlates nonnegatively
                // with everything
                rep.condition_holds = g.cwiseAbs().maxCoeff() <= 1e-12;
                break;
            case BaselineMeasure::Kind::BernoulliVector:
                // support is the origin plus (1/alpha)(1,...,1)
                rep.condition_holds = g.sum() >= -1e-12 * scale;
                break;
            case BaselineMeasure::Kind::Empirical: {
                const auto& atoms = baseline.discrete->atoms;
                double mn = std::numeric_limits<double>::infinity();
                for (Eigen::Index a = 0; a < atoms.rows(); ++a)
                    mn = std::min(mn, atoms.row(a).dot(g));
                rep.condition_holds = mn >= -1e-12 * std::max(scale, 1.0);
                break;
            }
        }
        if (!rep.condition_holds)
            rep.detail = "generator " + std::to_string(r) +
                         " correlates negatively with part of the baseline support";
    }
    if (!rep.condition_holds || probe_trials <= 0) return rep;

    rep.probe_run = true;
    rep.probe_pass = true;
    rep.worst_gap = 0.0;
    const RiskSolver solver{baseline, cfg};
    const Eigen::Index n_atoms = 5;
    for (int t = 0; t < probe_trials; ++t) {
        Eigen::MatrixXd atoms(n_atoms, d);
        std::uint64_t ctr = 0;
        for (Eigen::Index i = 0; i < n_atoms; ++i)
            for (Eigen::Index c = 0; c < d; ++c)
                atoms(i, c) = 2.0 * rng::uniform(seed, static_cast<std::uint64_t>(t) + 1, ctr++) - 1.0;
        const auto target = EmpiricalDistribution::validate_merging(
            atoms, Eigen::VectorXd::Constant(n_atoms, 1.0 / static_cast<double>(n_atoms)));
        Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
        for (Eigen::Index r = 0; r < cone.generators.rows(); ++r)
            z += rng::uniform(seed, static_cast<std::uint64_t>(t) + 1, ctr++) *
                 cone.generators.row(r).transpose();
        const double base = solver.rho(target);
        Eigen::MatrixXd shifted = target.atoms;
        shifted.rowwise() += z.transpose();
        const double up =
            solver.rho(EmpiricalDistribution::validate(shifted, target.weights));
        rep.worst_gap = std::min(rep.worst_gap, up - base);
    }
    rep.probe_pass = rep.worst_gap >= -tol;
    return rep;
}

// Builds the mu-comonotonic pair for (P, Q) by transporting the same fixed
// baseline sample to each, then checks rho(P+Q-comonotone) against
// rho(P) + rho(Q).
inline CheckReport check_comonotone_additivity(const BaselineMeasure& baseline,
                                               const EmpiricalDistribution& p,
                                               const EmpiricalDistribution& q,
                                               const transport::SolveConfig& cfg,
                                               double tol) {
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    if (!baseline.continuous())
        throw ValidationError("comonotone construction needs an absolutely continuous baseline");

    const auto rp = transport::tatonnement(baseline, p, cfg);
    const auto rq = transport::tatonnement(baseline, q, cfg);
    if (!rp.converged || !rq.converged)
        throw NumericalError("transport solver did not converge on a marginal");

    const Eigen::MatrixXd sample = sample_baseline(baseline, cfg.sample_count, cfg.seed, 0);
    const auto ap = transport::assign_cells(p, rp.weights, sample, cfg.threads);
    const auto aq = transport::assign_cells(q, rq.weights, sample, cfg.threads);

    // joint cell masses -> discrete distribution of the comonotone sum
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(p.size(), q.size());
    for (std::size_t j = 0; j < ap.size(); ++j)
        counts(ap[j], aq[j]) += 1.0;
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        for (Eigen::Index k = 0; k < q.size(); ++k)
            if (counts(i, k) > 0.0) {
                rows.push_back(i);
                cols.push_back(k);
            }
    Eigen::MatrixXd sum_atoms(static_cast<Eigen::Index>(rows.size()), p.dim());
    Eigen::VectorXd sum_w(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        sum_atoms.row(static_cast<Eigen::Index>(t)) =
            p.atoms.row(rows[t]) + q.atoms.row(cols[t]);
        sum_w[static_cast<Eigen::Index>(t)] =
            counts(rows[t], cols[t]) / static_cast<double>(sample.rows());
    }
    const auto sum_dist = EmpiricalDistribution::validate_merging(sum_atoms, sum_w);

    const auto rsum = transport::tatonnement(baseline, sum_dist, cfg);
    if (!rsum.converged)
        throw NumericalError("transport solver did not converge on the comonotone sum");

    CheckReport rep;
    rep.name = "comonotone_additivity";
    rep.gap = std::abs(rsum.risk_value - (rp.risk_value + rq.risk_value));
    rep.tol = tol;
    rep.pass = rep.gap <= tol;
    rep.detail = "rho(sum)=" + std::to_string(rsum.risk_value) + " vs rho(P)+rho(Q)=" +
                 std::to_string(rp.risk_value + rq.risk_value);
    return rep;
}

}  // namespace maxcorr::risk
