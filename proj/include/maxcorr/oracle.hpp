#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "maxcorr/rng.hpp"
#include "maxcorr/types.hpp"

// Independent brute-force routes to the maximal correlation value: the 1D
// quantile-block integral, exact assignment / transportation solves for
// discrete-discrete pairs, and an exhaustive rearrangement probe. These are
// the reference oracles the sampled transport solver is tested against.

namespace maxcorr::oracle {

namespace detail_o {

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.39894228040143267794;  // 1/sqrt(2*pi)
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Acklam's rational approximation polished with two Newton steps on erfc;
// accurate to ~1e-15 over (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("normal quantile argument must lie in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = norm_cdf(x) - p;
        x -= e / norm_pdf(x);
    }
    return x;
}

// 64-point Gauss-Legendre nodes/weights on [-1,1], computed once by Newton
// iteration on the Legendre recurrence.
inline const std::array<std::pair<double, double>, 64>& gl64() {
    static const std::array<std::pair<double, double>, 64> table = [] {
        std::array<std::pair<double, double>, 64> t{};
        constexpr int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            t[static_cast<std::size_t>(i)] = {x, w};
            t[static_cast<std::size_t>(n - 1 - i)] = {-x, w};
        }
        return t;
    }();
    return table;
}

// Integrates a smooth function over [lo, hi] with fixed-order panels.
inline double gl_panels(const std::function<double(double)>& f, double lo, double hi,
                        double max_panel_width) {
    if (hi <= lo) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_panel_width)));
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * h;
        const double mid = a + 0.5 * h;
        const double half = 0.5 * h;
        double s = 0.0;
        for (const auto& [x, w] : gl64()) s += w * f(mid + half * x);
        total += s * half;
    }
    return total;
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double fa, double m, double fm, double b, double fb,
                               double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_quadrature(const std::function<double(double)>& f, double a,
                                  double b, double tol) {
    if (b <= a) return 0.0;
    // Keep evaluations strictly inside (a, b); quantile-type integrands can
    // blow up at 0 and 1.
    const double delta = std::max(1e-14, 1e-12 * (b - a));
    const double aa = a + delta, bb = b - delta;
    if (bb <= aa) return 0.0;
    const double m = 0.5 * (aa + bb);
    const double fa = f(aa), fm = f(m), fb = f(bb);
    const double whole = (bb - aa) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, aa, fa, m, fm, bb, fb, whole, tol, 40);
}

}  // namespace detail_o

// Nondecreasing baseline quantile on (0,1). Uniform, Bernoulli and discrete
// (step-function) variants integrate in closed form; the Gaussian variant by
// Gauss-Legendre panels in x-space; arbitrary callables by adaptive Simpson.
struct Quantile1D {
    enum class Kind { Uniform, Gaussian, Bernoulli, Empirical, Custom };

    Kind kind = Kind::Uniform;
    double sigma = 1.0;
    double alpha = 0.5;
    std::vector<double> step_values;  // Empirical: sorted atom values
    std::vector<double> step_cum;     // Empirical: cumulative weights, last == 1
    std::function<double(double)> fn;

    static Quantile1D uniform() { return Quantile1D{}; }

    static Quantile1D gaussian(double sigma) {
        if (!(sigma > 0.0)) throw ValidationError("gaussian quantile needs sigma > 0");
        Quantile1D q;
        q.kind = Kind::Gaussian;
        q.sigma = sigma;
        return q;
    }

    static Quantile1D bernoulli(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("bernoulli alpha must lie in (0,1)");
        Quantile1D q;
        q.kind = Kind::Bernoulli;
        q.alpha = alpha;
        return q;
    }

    static Quantile1D empirical(const EmpiricalDistribution& dist) {
        if (dist.dim() != 1)
            throw ValidationError("empirical quantile baseline must be one-dimensional");
        Quantile1D q;
        q.kind = Kind::Empirical;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < dist.size(); ++k) {
            q.step_values.push_back(dist.atoms(k, 0));
            acc += dist.weights[k];
            q.step_cum.push_back(acc);
        }
        q.step_cum.back() = 1.0;
        return q;
    }

    static Quantile1D custom(std::function<double(double)> f) {
        Quantile1D q;
        q.kind = Kind::Custom;
        q.fn = std::move(f);
        return q;
    }

    double operator()(double t) const {
        switch (kind) {
            case Kind::Uniform: return t;
            case Kind::Gaussian: return sigma * detail_o::norm_quantile(t);
            case Kind::Bernoulli: return t > 1.0 - alpha ? 1.0 / alpha : 0.0;
            case Kind::Empirical: {
                const auto it = std::lower_bound(step_cum.begin(), step_cum.end(), t);
                const std::size_t i = std::min<std::size_t>(
                    static_cast<std::size_t>(it - step_cum.begin()), step_values.size() - 1);
                return step_values[i];
            }
            case Kind::Custom: return fn(t);
        }
        throw std::logic_error("unreachable");
    }

    // Integral of the quantile over (a, b) within (0, 1).
    double block_integral(double a, double b) const {
        if (b <= a) return 0.0;
        switch (kind) {
            case Kind::Uniform:
                return 0.5 * (b * b - a * a);
            case Kind::Bernoulli: {
                const double lo = std::max(a, 1.0 - alpha);
                const double hi = std::min(b, 1.0);
                return hi > lo ? (hi - lo) / alpha : 0.0;
            }
            case Kind::Empirical: {
                double total = 0.0;
                double prev = 0.0;
                for (std::size_t i = 0; i < step_values.size(); ++i) {
                    const double lo = std::max(a, prev);
                    const double hi = std::min(b, step_cum[i]);
                    if (hi > lo) total += step_values[i] * (hi - lo);
                    prev = step_cum[i];
                }
                return total;
            }
            case Kind::Gaussian: {
                // substitute t = Phi(x): integral of sigma * x * phi(x) over
                // the quantile-mapped interval; the tails beyond |x| = 9.5
                // contribute below 1e-19.
                const double qa = a <= 0.0 ? -9.5 : std::max(-9.5, detail_o::norm_quantile(a));
                const double qb = b >= 1.0 ? 9.5 : std::min(9.5, detail_o::norm_quantile(b));
                if (qb <= qa) return 0.0;
                const double s = sigma;
                return detail_o::gl_panels(
                    [s](double x) { return s * x * detail_o::norm_pdf(x); }, qa, qb, 0.5);
            }
            case Kind::Custom:
                return detail_o::adaptive_quadrature(fn, a, b, 1e-12);
        }
        throw std::logic_error("unreachable");
    }
};

// Maximal correlation of a discrete 1D target against the baseline whose
// quantile is `q`: atoms sorted ascending, each paired with its quantile
// block [c_{k-1}, c_k) of cumulative target weight.
inline double max_corr_1d_quantile(const Quantile1D& q, const EmpiricalDistribution& target) {
    if (target.dim() != 1)
        throw ValidationError("the quantile oracle handles one-dimensional targets only");
    // lexicographic atom order is ascending order in d=1
    double total = 0.0;
    double cum = 0.0;
    for (Eigen::Index k = 0; k < target.size(); ++k) {
        const double next = (k + 1 == target.size()) ? 1.0 : cum + target.weights[k];
        total += target.atoms(k, 0) * q.block_integral(cum, next);
        cum = next;
    }
    return total;
}

namespace detail_o {

// O(n^3) shortest-augmenting-path assignment, minimization, square matrix.
// Returns col_to_row matching.
inline std::vector<int> lap_min(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);    // p[j]: row matched to col j
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_to_row(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j)
        col_to_row[static_cast<std::size_t>(j - 1)] = p[static_cast<std::size_t>(j)] - 1;
    return col_to_row;
}

// Transportation simplex (network simplex on the bipartite transport graph),
// maximization. Bland's entering rule; explicit spanning-tree basis.
struct TransportPlan {
    double value = 0.0;
    std::vector<std::tuple<int, int, double>> flows;  // (source idx, target idx, mass)
};

inline TransportPlan transport_simplex_max(const Eigen::MatrixXd& profit,
                                           const Eigen::VectorXd& supply,
                                           const Eigen::VectorXd& demand) {
    const int n = static_cast<int>(profit.rows());
    const int m = static_cast<int>(profit.cols());
    struct Arc {
        int i, j;
        double flow;
    };
    std::vector<Arc> basis;
    basis.reserve(static_cast<std::size_t>(n + m - 1));

    // Northwest-corner start: always exactly n+m-1 basic arcs (ties produce
    // zero-flow degenerate arcs).
    {
        std::vector<double> ra(supply.data(), supply.data() + n);
        std::vector<double> rb(demand.data(), demand.data() + m);
        int i = 0, j = 0;
        while (true) {
            const double f = std::min(ra[static_cast<std::size_t>(i)],
                                      rb[static_cast<std::size_t>(j)]);
            basis.push_back({i, j, f});
            ra[static_cast<std::size_t>(i)] -= f;
            rb[static_cast<std::size_t>(j)] -= f;
            if (i == n - 1 && j == m - 1) break;
            if (i < n - 1 && (ra[static_cast<std::size_t>(i)] <=
                              rb[static_cast<std::size_t>(j)]))
                ++i;
            else if (j < m - 1)
                ++j;
            else
                ++i;
        }
    }

    const double scale = std::max(1.0, profit.cwiseAbs().maxCoeff());
    const double tol = 1e-11 * scale;
    const long max_pivots = 20000L * (n + m);

    std::vector<double> du(static_cast<std::size_t>(n));
    std::vector<double> dv(static_cast<std::size_t>(m));
    std::vector<std::vector<int>> row_arcs(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> col_arcs(static_cast<std::size_t>(m));

    auto rebuild_adjacency = [&] {
        for (auto& v : row_arcs) v.clear();
        for (auto& v : col_arcs) v.clear();
        for (int a = 0; a < static_cast<int>(basis.size()); ++a) {
            row_arcs[static_cast<std::size_t>(basis[static_cast<std::size_t>(a)].i)].push_back(a);
            col_arcs[static_cast<std::size_t>(basis[static_cast<std::size_t>(a)].j)].push_back(a);
        }
    };

    // Duals from the spanning tree: du[i] + dv[j] = profit(i,j) on basic arcs.
    auto compute_duals = [&] {
        std::fill(du.begin(), du.end(), std::numeric_limits<double>::quiet_NaN());
        std::fill(dv.begin(), dv.end(), std::numeric_limits<double>::quiet_NaN());
        du[0] = 0.0;
        std::vector<int> stack{0};  // encoded: rows 0..n-1, cols n..n+m-1
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node < n) {
                for (int a : row_arcs[static_cast<std::size_t>(node)]) {
                    const auto& arc = basis[static_cast<std::size_t>(a)];
                    if (std::isnan(dv[static_cast<std::size_t>(arc.j)])) {
                        dv[static_cast<std::size_t>(arc.j)] =
                            profit(arc.i, arc.j) - du[static_cast<std::size_t>(arc.i)];
                        stack.push_back(n + arc.j);
                    }
                }
            } else {
                const int j = node - n;
                for (int a : col_arcs[static_cast<std::size_t>(j)]) {
                    const auto& arc = basis[static_cast<std::size_t>(a)];
                    if (std::isnan(du[static_cast<std::size_t>(arc.i)])) {
                        du[static_cast<std::size_t>(arc.i)] =
                            profit(arc.i, arc.j) - dv[static_cast<std::size_t>(arc.j)];
                        stack.push_back(arc.i);
                    }
                }
            }
        }
    };

    // Tree path between row i0 and col j0 through basic arcs.
    auto find_cycle = [&](int i0, int j0) {
        const int nodes = n + m;
        std::vector<int> parent_node(static_cast<std::size_t>(nodes), -1);
        std::vector<int> parent_arc(static_cast<std::size_t>(nodes), -1);
        std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
        std::vector<int> stack{i0};
        seen[static_cast<std::size_t>(i0)] = 1;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            if (node == n + j0) break;
            const auto& arcs = node < n ? row_arcs[static_cast<std::size_t>(node)]
                                        : col_arcs[static_cast<std::size_t>(node - n)];
            for (int a : arcs) {
                const auto& arc = basis[static_cast<std::size_t>(a)];
                const int other = node < n ? n + arc.j : arc.i;
                if (!seen[static_cast<std::size_t>(other)]) {
                    seen[static_cast<std::size_t>(other)] = 1;
                    parent_node[static_cast<std::size_t>(other)] = node;
                    parent_arc[static_cast<std::size_t>(other)] = a;
                    stack.push_back(other);
                }
            }
        }
        std::vector<int> path;  // arc indices from j0-side back to i0
        int node = n + j0;
        while (node != i0) {
            path.push_back(parent_arc[static_cast<std::size_t>(node)]);
            node = parent_node[static_cast<std::size_t>(node)];
        }
        return path;
    };

    rebuild_adjacency();
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
        compute_duals();
        int ei = -1, ej = -1;
        // Bland: first profitable non-basic arc in row-major order.
        for (int i = 0; i < n && ei < 0; ++i)
            for (int j = 0; j < m; ++j) {
                if (profit(i, j) - du[static_cast<std::size_t>(i)] -
                        dv[static_cast<std::size_t>(j)] > tol) {
                    bool basic = false;
                    for (int a : row_arcs[static_cast<std::size_t>(i)])
                        if (basis[static_cast<std::size_t>(a)].j == j) {
                            basic = true;
                            break;
                        }
                    if (!basic) {
                        ei = i;
                        ej = j;
                        break;
                    }
                }
            }
        if (ei < 0) {
            TransportPlan plan;
            for (const auto& arc : basis) {
                if (arc.flow > 0.0)
                    plan.flows.emplace_back(arc.i, arc.j, arc.flow);
                plan.value += arc.flow * profit(arc.i, arc.j);
            }
            return plan;
        }

        // The entering arc closes one cycle with the tree. Walking the tree
        // path from the entering column back to the entering row alternates
        // subtract/add starting with subtract.
        const std::vector<int> path = find_cycle(ei, ej);
        double theta = std::numeric_limits<double>::infinity();
        int leave_pos = -1;
        for (std::size_t idx = 0; idx < path.size(); idx += 2) {
            const double f = basis[static_cast<std::size_t>(path[idx])].flow;
            if (f < theta) {
                theta = f;
                leave_pos = static_cast<int>(idx);
            }
        }
        for (std::size_t idx = 0; idx < path.size(); ++idx) {
            auto& arc = basis[static_cast<std::size_t>(path[idx])];
            arc.flow += (idx % 2 == 0) ? -theta : theta;
        }
        const int leaving_arc = path[static_cast<std::size_t>(leave_pos)];
        basis[static_cast<std::size_t>(leaving_arc)] = {ei, ej, theta};
        rebuild_adjacency();
    }
    throw NumericalError("transportation simplex failed to terminate");
}

}  // namespace detail_o

struct AssignmentResult {
    double value = 0.0;
    // (source index, target index, mass), marginals match the weight vectors
    std::vector<std::tuple<int, int, double>> coupling;
    // populated on the equal-weight square path
    std::vector<int> permutation;
};

// Route selector for the equal-weight square case. Auto enumerates up to the
// exhaustive limit and switches to the assignment algorithm beyond it; the
// explicit values exist so the two routes can be tested against each other.
enum class Method { Auto, Exhaustive, Lap };

inline constexpr int kExhaustiveLimit = 9;
inline constexpr int kAssignmentLimit = 2000;

namespace detail_o {

inline bool uniform_weights(const EmpiricalDistribution& e) {
    const double w = 1.0 / static_cast<double>(e.size());
    return (e.weights.array() - w).abs().maxCoeff() <= 1e-12;
}

inline Eigen::MatrixXd profit_matrix(const EmpiricalDistribution& source,
                                     const EmpiricalDistribution& target) {
    return source.atoms * target.atoms.transpose();
}

// Exact optimal value without the exhaustive-search detour; used in inner
// loops where the value is evaluated many thousands of times.
inline double exact_value(const EmpiricalDistribution& source,
                          const EmpiricalDistribution& target) {
    const Eigen::MatrixXd profit = profit_matrix(source, target);
    if (source.size() == target.size() && uniform_weights(source) &&
        uniform_weights(target)) {
        const int n = static_cast<int>(source.size());
        const std::vector<int> col_to_row = lap_min(-profit);
        double v = 0.0;
        for (int j = 0; j < n; ++j)
            v += profit(col_to_row[static_cast<std::size_t>(j)], j);
        return v / static_cast<double>(n);
    }
    return transport_simplex_max(profit, source.weights, target.weights).value;
}

}  // namespace detail_o

// Exact maximal correlation between two discrete distributions. Equal-weight
// pairs of equal size go through exhaustive search (n <= 9) or the
// assignment solver (n <= 2000); general weights through the transportation
// simplex.
inline AssignmentResult max_corr_assignment(const EmpiricalDistribution& source,
                                            const EmpiricalDistribution& target,
                                            Method method = Method::Auto) {
    if (source.dim() != target.dim())
        throw ValidationError("source and target dimensions differ");
    const Eigen::MatrixXd profit = detail_o::profit_matrix(source, target);

    AssignmentResult res;
    if (source.size() == target.size() && detail_o::uniform_weights(source) &&
        detail_o::uniform_weights(target)) {
        const int n = static_cast<int>(source.size());
        const double mass = 1.0 / static_cast<double>(n);
        const bool exhaustive = method == Method::Exhaustive ||
                                (method == Method::Auto && n <= kExhaustiveLimit);
        if (exhaustive && n > kExhaustiveLimit)
            throw ValidationError("exhaustive search is capped at n = " +
                                  std::to_string(kExhaustiveLimit));
        if (exhaustive) {
            std::vector<int> perm(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), 0);
            std::vector<int> best = perm;
            double best_val = -std::numeric_limits<double>::infinity();
            do {
                double v = 0.0;
                for (int j = 0; j < n; ++j)
                    v += profit(j, perm[static_cast<std::size_t>(j)]);
                if (v > best_val) {
                    best_val = v;
                    best = perm;
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
            res.permutation = best;
            res.value = best_val * mass;
        } else if (n <= kAssignmentLimit) {
            const std::vector<int> col_to_row = detail_o::lap_min(-profit);
            res.permutation.assign(static_cast<std::size_t>(n), -1);
            for (int j = 0; j < n; ++j)
                res.permutation[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(j)])] = j;
            double v = 0.0;
            for (int i = 0; i < n; ++i)
                v += profit(i, res.permutation[static_cast<std::size_t>(i)]);
            res.value = v * mass;
        } else {
            throw ValidationError("assignment instance exceeds the configured size limit (" +
                                  std::to_string(kAssignmentLimit) + ")");
        }
        for (int i = 0; i < static_cast<int>(res.permutation.size()); ++i)
            res.coupling.emplace_back(i, res.permutation[static_cast<std::size_t>(i)], mass);
        return res;
    }
    if (method == Method::Exhaustive)
        throw ValidationError("exhaustive search needs equal-size uniform-weight inputs");

    if (static_cast<long>(source.size()) * static_cast<long>(target.size()) > 4000000L)
        throw ValidationError("transportation instance exceeds the configured size limit");
    const auto plan = detail_o::transport_simplex_max(profit, source.weights, target.weights);
    res.value = plan.value;
    res.coupling = plan.flows;
    return res;
}

struct NeutralityResult {
    double best_found = -std::numeric_limits<double>::infinity();
    double rho_a = 0.0;
    double rho_b = 0.0;
    std::vector<int> perm_a;  // attaining rearrangement of target_a
    std::vector<int> perm_b;  // attaining rearrangement of target_b
    std::int64_t evaluations = 0;
};

// Searches rearrangement pairs of (target_a, target_b) against the source
// for the largest rho(A~ + B~). trials == 0 enumerates exhaustively; two
// pairs related by a common relabeling of the sample points produce the
// same sum distribution, so enumeration over the relative rearrangement of
// target_b (perm_a = identity) covers every value the full double loop
// would visit. trials > 0 samples random pairs instead.
inline NeutralityResult structure_neutrality_probe(const EmpiricalDistribution& source,
                                                   const EmpiricalDistribution& target_a,
                                                   const EmpiricalDistribution& target_b,
                                                   std::int64_t trials, std::uint64_t seed) {
    const Eigen::Index n = source.size();
    if (target_a.size() != n || target_b.size() != n)
        throw ValidationError("the neutrality probe needs equal-size distributions");
    if (target_a.dim() != source.dim() || target_b.dim() != source.dim())
        throw ValidationError("the neutrality probe needs equal dimensions");
    if (!detail_o::uniform_weights(source) || !detail_o::uniform_weights(target_a) ||
        !detail_o::uniform_weights(target_b))
        throw ValidationError("the neutrality probe needs uniform weights");
    if (trials <= 0 && n > kExhaustiveLimit)
        throw ValidationError("exhaustive rearrangement search is capped at n = " +
                              std::to_string(kExhaustiveLimit) + "; pass trials > 0 to sample");

    NeutralityResult out;
    out.rho_a = max_corr_assignment(source, target_a).value;
    out.rho_b = max_corr_assignment(source, target_b).value;

    const Eigen::Index d = source.dim();
    std::vector<int> ida(static_cast<std::size_t>(n));
    std::iota(ida.begin(), ida.end(), 0);

    Eigen::MatrixXd sums(n, d);
    auto evaluate = [&](const std::vector<int>& pa, const std::vector<int>& pb) {
        for (Eigen::Index j = 0; j < n; ++j)
            sums.row(j) = target_a.atoms.row(pa[static_cast<std::size_t>(j)]) +
                          target_b.atoms.row(pb[static_cast<std::size_t>(j)]);
        const EmpiricalDistribution sum_dist = EmpiricalDistribution::validate_merging(
            sums, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
        const double rho = detail_o::exact_value(source, sum_dist);
        ++out.evaluations;
        if (rho > out.best_found) {
            out.best_found = rho;
            out.perm_a = pa;
            out.perm_b = pb;
        }
    };

    if (trials <= 0) {
        std::vector<int> pb = ida;
        do {
            evaluate(ida, pb);
        } while (std::next_permutation(pb.begin(), pb.end()));
    } else {
        std::vector<int> pa(static_cast<std::size_t>(n)), pb(static_cast<std::size_t>(n));
        for (std::int64_t t = 0; t < trials; ++t) {
            std::iota(pa.begin(), pa.end(), 0);
            std::iota(pb.begin(), pb.end(), 0);
            std::uint64_t ctr = 0;
            for (Eigen::Index j = n - 1; j > 0; --j) {
                const auto r1 = rng::uniform_index(seed, static_cast<std::uint64_t>(t) + 1,
                                                   ctr++, static_cast<std::uint64_t>(j) + 1);
                std::swap(pa[static_cast<std::size_t>(j)], pa[static_cast<std::size_t>(r1)]);
                const auto r2 = rng::uniform_index(seed, static_cast<std::uint64_t>(t) + 1,
                                                   ctr++, static_cast<std::uint64_t>(j) + 1);
                std::swap(pb[static_cast<std::size_t>(j)], pb[static_cast<std::size_t>(r2)]);
            }
            evaluate(pa, pb);
        }
    }
    return out;
}

}  // namespace maxcorr::oracle
