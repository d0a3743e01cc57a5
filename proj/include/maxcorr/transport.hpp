#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "maxcorr/types.hpp"

// Semi-discrete optimal transport between a sampled baseline measure and a
// discrete target: evaluation of the piecewise-affine dual potential
// w*(u) = max_k(<u,Y_k> - w_k), Monte Carlo cell statistics, and the
// tatonnement iteration that balances cell masses against target weights.

namespace maxcorr::transport {

struct StepRule {
    enum class Kind { Fixed, Decay, AdaptiveBacktracking };

    Kind kind = Kind::AdaptiveBacktracking;
    double eps0 = 0.0;      // 0 means: pick 1/(2n) at solve time
    double exponent = 0.5;  // decay: eps_m = eps0 / (m+1)^exponent
    double shrink = 0.5;
    double grow = 1.1;

    static StepRule fixed(double eps) {
        StepRule r;
        r.kind = Kind::Fixed;
        r.eps0 = eps;
        return r;
    }
    static StepRule decay(double eps0, double exponent) {
        StepRule r;
        r.kind = Kind::Decay;
        r.eps0 = eps0;
        r.exponent = exponent;
        return r;
    }
    static StepRule adaptive(double eps0 = 0.0, double shrink = 0.5, double grow = 1.1) {
        StepRule r;
        r.kind = Kind::AdaptiveBacktracking;
        r.eps0 = eps0;
        r.shrink = shrink;
        r.grow = grow;
        return r;
    }

    void validate() const {
        if (eps0 < 0.0 || !std::isfinite(eps0))
            throw ValidationError("step size must be positive");
        if (kind != Kind::AdaptiveBacktracking && eps0 == 0.0)
            throw ValidationError("fixed/decay step rules need an explicit step size");
        if (kind == Kind::Decay && !(exponent > 0.0 && exponent <= 1.0))
            throw ValidationError("decay exponent must lie in (0,1]");
        if (kind == Kind::AdaptiveBacktracking) {
            if (!(shrink > 0.0 && shrink < 1.0))
                throw ValidationError("backtracking shrink factor must lie in (0,1)");
            if (!(grow >= 1.0))
                throw ValidationError("backtracking grow factor must be >= 1");
        }
    }
};

struct SolveConfig {
    std::int64_t sample_count = 100000;
    std::uint64_t seed = 12345;
    int max_iters = 2000;
    StepRule step;
    double tol_residual = 1e-3;
    bool resample_each_iter = false;
    int threads = 0;                  // 0 = hardware concurrency
    Eigen::VectorXd initial_weights;  // empty = zeros

    void validate() const {
        if (sample_count < 1000)
            throw ValidationError("sample_count below 1000: the cell estimator would be too noisy");
        if (max_iters < 1) throw ValidationError("max_iters must be positive");
        if (!(tol_residual > 0.0)) throw ValidationError("tol_residual must be positive");
        if (threads < 0) throw ValidationError("threads must be >= 0");
        step.validate();
        if (resample_each_iter && step.kind == StepRule::Kind::AdaptiveBacktracking)
            throw ValidationError("per-iteration resampling needs a fixed or decaying step rule; "
                                  "backtracking compares objectives on a fixed sample");
    }
};

struct SolveReport {
    DualWeights weights;
    double risk_value = 0.0;  // (1/N) sum_j <u_j, Y_assign(j)> at the final weights
    double residual = 0.0;    // max_k |pi_k - p_k|
    std::vector<double> objective_trace;  // accepted iterations, starting value first
    std::vector<double> residual_trace;
    CellStats cell_stats;
    int iterations = 0;
    bool converged = false;
    double primal_value = 0.0;  // == risk_value
    double dual_value = 0.0;    // sampled Phi_{mu,pi} at the final weights
    double duality_gap = 0.0;
    std::vector<std::string> warnings;
};

// Dual potential at a single point: value and the attaining atom
// (smallest index on ties).
inline std::pair<double, Eigen::Index> potential_eval(const DualWeights& w,
                                                      const EmpiricalDistribution& target,
                                                      const Eigen::VectorXd& u) {
    if (w.values.size() != target.size())
        throw ValidationError("dual weights indexed by a different atom count");
    if (u.size() != target.dim())
        throw ValidationError("point dimension does not match the target distribution");
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index k = 0; k < target.size(); ++k) {
        const double v = target.atoms.row(k).dot(u) - w.values[k];
        if (v > best) {
            best = v;
            arg = k;
        }
    }
    return {best, arg};
}

namespace detail_t {

inline int effective_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Assigns every sample point to its cell. Results are a function of the
// block layout only (fixed block size), never of the worker count: threads
// write disjoint per-sample slots and all floating-point accumulation
// happens later, sequentially, in sample order.
inline void assign_points(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& atoms,
                          const Eigen::VectorXd& w, int threads,
                          std::vector<int>& assign, Eigen::VectorXd& wstar,
                          Eigen::VectorXd& corr) {
    const Eigen::Index big_n = samples.rows();
    const Eigen::Index n = atoms.rows();
    // Keep the n x block score tile small enough to stay cache-resident;
    // block layout is fixed by n alone so results never depend on threads.
    const Eigen::Index kBlock = std::clamp<Eigen::Index>(32768 / std::max<Eigen::Index>(n, 1), 16, 256);
    assign.resize(static_cast<std::size_t>(big_n));
    wstar.resize(big_n);
    corr.resize(big_n);

    const Eigen::Index nblocks = (big_n + kBlock - 1) / kBlock;
    const int nthreads = std::min<int>(effective_threads(threads),
                                       static_cast<int>(nblocks));

    const Eigen::Index d = atoms.cols();
    auto run_blocks = [&](Eigen::Index b_begin, Eigen::Index b_end) {
        // score column c holds <u_{j0+c}, Y_k> - w_k over k; built from d
        // axpy updates (far cheaper than a GEMM with inner dimension d).
        Eigen::MatrixXd scores(n, kBlock);
        for (Eigen::Index b = b_begin; b < b_end; ++b) {
            const Eigen::Index j0 = b * kBlock;
            const Eigen::Index cnt = std::min(kBlock, big_n - j0);
            for (Eigen::Index c = 0; c < cnt; ++c) {
                auto sc = scores.col(c);
                sc = -w;
                for (Eigen::Index i = 0; i < d; ++i)
                    sc += samples(j0 + c, i) * atoms.col(i);
            }
            for (Eigen::Index c = 0; c < cnt; ++c) {
                const double* colp = scores.col(c).data();
                const double best = scores.col(c).maxCoeff();
                Eigen::Index arg = 0;
                while (colp[arg] != best) ++arg;  // first attaining index
                assign[static_cast<std::size_t>(j0 + c)] = static_cast<int>(arg);
                wstar[j0 + c] = best;
                corr[j0 + c] = best + w[arg];
            }
        }
    };

    if (nthreads <= 1) {
        run_blocks(0, nblocks);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        const Eigen::Index b0 = nblocks * t / nthreads;
        const Eigen::Index b1 = nblocks * (t + 1) / nthreads;
        pool.emplace_back(run_blocks, b0, b1);
    }
    for (auto& th : pool) th.join();
}

struct ScanStats {
    CellStats cells;
    double mean_corr = 0.0;
    std::vector<std::int64_t> counts;
};

// Sequential reduction in sample order.
inline ScanStats reduce_cells(const Eigen::MatrixXd& samples,
                              const EmpiricalDistribution& target,
                              const Eigen::VectorXd& w, const std::vector<int>& assign,
                              const Eigen::VectorXd& wstar, const Eigen::VectorXd& corr,
                              std::uint64_t seed) {
    const Eigen::Index big_n = samples.rows();
    const Eigen::Index n = target.size();
    const Eigen::Index d = target.dim();

    ScanStats out;
    out.counts.assign(static_cast<std::size_t>(n), 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, d);
    double sum_wstar = 0.0;
    double sum_corr = 0.0;
    for (Eigen::Index j = 0; j < big_n; ++j) {
        const int k = assign[static_cast<std::size_t>(j)];
        out.counts[static_cast<std::size_t>(k)]++;
        sums.row(k) += samples.row(j);
        sum_wstar += wstar[j];
        sum_corr += corr[j];
    }

    CellStats& cs = out.cells;
    cs.masses.resize(n);
    cs.barycenters = Eigen::MatrixXd::Constant(n, d, std::numeric_limits<double>::quiet_NaN());
    cs.defined.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto c = out.counts[static_cast<std::size_t>(k)];
        cs.masses[k] = static_cast<double>(c) / static_cast<double>(big_n);
        if (c > 0) {
            cs.barycenters.row(k) = sums.row(k) / static_cast<double>(c);
            cs.defined[static_cast<std::size_t>(k)] = 1;
        }
    }
    cs.objective = sum_wstar / static_cast<double>(big_n) + target.weights.dot(w);
    cs.sample_count = big_n;
    cs.seed = seed;
    out.mean_corr = sum_corr / static_cast<double>(big_n);
    return out;
}

inline void check_solvable_baseline(const BaselineMeasure& baseline,
                                    const EmpiricalDistribution& target) {
    if (baseline.kind == BaselineMeasure::Kind::BernoulliVector)
        throw ValidationError("cell estimation needs a continuous or empirical baseline; "
                              "Bernoulli baselines are evaluated through the expected-shortfall "
                              "closed form in the risk layer");
    if (baseline.dim() != target.dim())
        throw ValidationError("baseline dimension " + std::to_string(baseline.dim()) +
                              " does not match target dimension " + std::to_string(target.dim()));
}

}  // namespace detail_t

// Cell masses, barycenters and the sampled objective
//   Phi(w) = (1/N) sum_j w*(u_j) + sum_k pi_k w_k
// on the seeded sample determined by (baseline, cfg).
inline CellStats cell_stats(const BaselineMeasure& baseline, const EmpiricalDistribution& target,
                            const DualWeights& w, const SolveConfig& cfg) {
    cfg.validate();
    detail_t::check_solvable_baseline(baseline, target);
    if (w.values.size() != target.size())
        throw ValidationError("dual weights indexed by a different atom count");
    const Eigen::VectorXd wc = DualWeights::canonical(w.values).values;
    const Eigen::MatrixXd samples = sample_baseline(baseline, cfg.sample_count, cfg.seed, 0);
    std::vector<int> assign;
    Eigen::VectorXd wstar, corr;
    detail_t::assign_points(samples, target.atoms, wc, cfg.threads, assign, wstar, corr);
    return detail_t::reduce_cells(samples, target, wc, assign, wstar, corr, cfg.seed).cells;
}

inline double objective(const BaselineMeasure& baseline, const EmpiricalDistribution& target,
                        const DualWeights& w, const SolveConfig& cfg) {
    return cell_stats(baseline, target, w, cfg).objective;
}

// Assigns arbitrary points to cells under given weights. Used for partition
// dumps and push-forward validation.
inline std::vector<int> assign_cells(const EmpiricalDistribution& target, const DualWeights& w,
                                     const Eigen::MatrixXd& points, int threads = 0) {
    if (points.cols() != target.dim())
        throw ValidationError("point dimension does not match the target distribution");
    std::vector<int> assign;
    Eigen::VectorXd wstar, corr;
    detail_t::assign_points(points, target.atoms, w.values, threads, assign, wstar, corr);
    return assign;
}

// Price-adjustment iteration on the sampled dual objective. The gradient is
// pi - p, and prices descend along it: an oversupplied cell (p_k > pi_k) has
// its price raised, which shrinks the cell. Non-convergence is reported, not
// thrown.
inline SolveReport tatonnement(const BaselineMeasure& baseline,
                               const EmpiricalDistribution& target, const SolveConfig& cfg) {
    cfg.validate();
    detail_t::check_solvable_baseline(baseline, target);
    const Eigen::Index n = target.size();
    if (cfg.initial_weights.size() != 0 && cfg.initial_weights.size() != n)
        throw ValidationError("initial weights indexed by a different atom count");

    const double eps0 = cfg.step.eps0 > 0.0 ? cfg.step.eps0
                                            : 1.0 / (2.0 * static_cast<double>(n));
    Eigen::MatrixXd samples = sample_baseline(baseline, cfg.sample_count, cfg.seed, 0);

    Eigen::VectorXd w = cfg.initial_weights.size() == n
                            ? DualWeights::canonical(cfg.initial_weights).values
                            : Eigen::VectorXd::Zero(n);

    std::vector<int> assign;
    Eigen::VectorXd wstar, corr;
    auto scan = [&](const Eigen::MatrixXd& pts, const Eigen::VectorXd& weights) {
        detail_t::assign_points(pts, target.atoms, weights, cfg.threads, assign, wstar, corr);
        return detail_t::reduce_cells(pts, target, weights, assign, wstar, corr, cfg.seed);
    };

    detail_t::ScanStats cur = scan(samples, w);

    SolveReport rep;
    rep.objective_trace.push_back(cur.cells.objective);
    rep.residual_trace.push_back((target.weights - cur.cells.masses).lpNorm<Eigen::Infinity>());

    double eps_adaptive = eps0;
    int empty_iters = 0;
    bool stalled = false;

    for (int m = 0; m < cfg.max_iters; ++m) {
        if (cfg.resample_each_iter && m > 0) {
            samples = sample_baseline(baseline, cfg.sample_count, cfg.seed,
                                      static_cast<std::uint64_t>(m));
            cur = scan(samples, w);
        }
        Eigen::VectorXd grad = target.weights - cur.cells.masses;
        const double resid = grad.lpNorm<Eigen::Infinity>();
        if (resid <= cfg.tol_residual) break;
        rep.iterations = m + 1;
        for (Eigen::Index k = 0; k < n; ++k)
            if (!cur.cells.defined[static_cast<std::size_t>(k)]) {
                ++empty_iters;
                break;
            }

        if (cfg.step.kind == StepRule::Kind::AdaptiveBacktracking) {
            bool accepted = false;
            double eps_try = eps_adaptive;
            for (int bt = 0; bt < 64; ++bt) {
                const Eigen::VectorXd w_try =
                    DualWeights::canonical(w - eps_try * grad).values;
                detail_t::ScanStats trial = scan(samples, w_try);
                if (trial.cells.objective <= cur.cells.objective) {
                    w = w_try;
                    cur = std::move(trial);
                    eps_adaptive = std::min(eps_try * cfg.step.grow, 1e12);
                    accepted = true;
                    break;
                }
                eps_try *= cfg.step.shrink;
            }
            if (!accepted) {
                stalled = true;
                break;
            }
        } else {
            const double eps_m =
                cfg.step.kind == StepRule::Kind::Fixed
                    ? eps0
                    : eps0 / std::pow(static_cast<double>(m + 1), cfg.step.exponent);
            w = DualWeights::canonical(w - eps_m * grad).values;
            cur = scan(samples, w);
        }
        rep.objective_trace.push_back(cur.cells.objective);
        rep.residual_trace.push_back((target.weights - cur.cells.masses).lpNorm<Eigen::Infinity>());
    }

    if (cfg.resample_each_iter) {
        samples = sample_baseline(baseline, cfg.sample_count, cfg.seed, 0);
        cur = scan(samples, w);
    }

    rep.weights = DualWeights::canonical(w);
    rep.residual = (target.weights - cur.cells.masses).lpNorm<Eigen::Infinity>();
    rep.converged = rep.residual <= cfg.tol_residual;
    rep.risk_value = cur.mean_corr;
    rep.primal_value = cur.mean_corr;
    rep.dual_value = cur.cells.objective;
    rep.duality_gap = std::abs(rep.dual_value - rep.primal_value);
    rep.cell_stats = std::move(cur.cells);
    if (rep.iterations > 0 && empty_iters * 4 > rep.iterations)
        rep.warnings.push_back("empty cells persisted in " + std::to_string(empty_iters) +
                               " of " + std::to_string(rep.iterations) + " iterations");
    if (stalled)
        rep.warnings.push_back("backtracking line search stalled before reaching the "
                               "residual tolerance");
    return rep;
}

struct QuantileMap {
    std::vector<int> atom_indices;
    Eigen::MatrixXd values;  // one mapped atom per row
};

// The converged transport map u -> Y_{assign(u)}; with a uniform baseline in
// d=1 this is the classical quantile function at cell interiors.
inline QuantileMap generalized_quantile(const SolveReport& report,
                                        const EmpiricalDistribution& target,
                                        const Eigen::MatrixXd& points) {
    if (report.weights.values.size() != target.size())
        throw ValidationError("report weights indexed by a different atom count");
    QuantileMap qm;
    qm.atom_indices = assign_cells(target, report.weights, points);
    qm.values.resize(points.rows(), target.dim());
    for (Eigen::Index j = 0; j < points.rows(); ++j)
        qm.values.row(j) = target.atoms.row(qm.atom_indices[static_cast<std::size_t>(j)]);
    return qm;
}

struct SemidiscreteResult {
    double risk_value = 0.0;
    SolveReport report;
};

// Maximal correlation of the discrete target against the baseline, via the
// dual weights. The report carries both the primal (correlation) and dual
// (objective) values; they coincide at the optimum.
inline SemidiscreteResult max_corr_semidiscrete(const BaselineMeasure& baseline,
                                                const EmpiricalDistribution& target,
                                                const SolveConfig& cfg) {
    SemidiscreteResult res;
    res.report = tatonnement(baseline, target, cfg);
    res.risk_value = res.report.risk_value;
    return res;
}

}  // namespace maxcorr::transport
