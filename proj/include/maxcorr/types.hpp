#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maxcorr/rng.hpp"

namespace maxcorr {

// Input that fails structural validation (shape, finiteness, ranges).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what)
        : std::runtime_error(what) {}
};

// Input that is structurally fine but mathematically unusable
// (not positive semidefinite, singular, ...).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what)
        : std::runtime_error(what) {}
};

namespace detail {

// Strict lexicographic order on matrix rows.
inline bool row_less(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(a, j) < m(b, j)) return true;
        if (m(a, j) > m(b, j)) return false;
    }
    return false;
}

inline bool rows_equal(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (m(a, j) != m(b, j)) return false;
    return true;
}

}  // namespace detail

// Discrete distribution with n distinct atoms in R^d and positive weights
// summing to one. Atoms are kept in lexicographic order so that every
// downstream computation is independent of the input row order.
struct EmpiricalDistribution {
    Eigen::MatrixXd atoms;    // n x d, rows sorted lexicographically
    Eigen::VectorXd weights;  // n, positive, sums to 1

    Eigen::Index size() const { return atoms.rows(); }
    Eigen::Index dim() const { return atoms.cols(); }

    // Validates and canonicalizes raw data. Weight sums within 1e-9 of one
    // are silently renormalized (CSV round-trips lose digits); larger
    // deviations are rejected.
    static EmpiricalDistribution validate(Eigen::MatrixXd raw_atoms,
                                          Eigen::VectorXd raw_weights) {
        const Eigen::Index n = raw_atoms.rows();
        const Eigen::Index d = raw_atoms.cols();
        if (n < 1 || d < 1)
            throw ValidationError("empirical distribution needs at least one atom and one dimension");
        if (raw_weights.size() != n)
            throw ValidationError("atom/weight count mismatch: " + std::to_string(n) +
                                  " atoms vs " + std::to_string(raw_weights.size()) + " weights");
        if (!raw_atoms.allFinite())
            throw ValidationError("non-finite atom coordinate");
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!std::isfinite(raw_weights[k]) || raw_weights[k] <= 0.0)
                throw ValidationError("weight " + std::to_string(k) + " is not a positive finite number");
        }
        const double total = raw_weights.sum();
        if (std::abs(total - 1.0) > 1e-9)
            throw ValidationError("weights sum to " + std::to_string(total) +
                                  ", outside the 1e-9 renormalization band");
        raw_weights /= total;

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return detail::row_less(raw_atoms, a, b);
        });

        EmpiricalDistribution out;
        out.atoms.resize(n, d);
        out.weights.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            out.atoms.row(k) = raw_atoms.row(order[static_cast<std::size_t>(k)]);
            out.weights[k] = raw_weights[order[static_cast<std::size_t>(k)]];
        }
        for (Eigen::Index k = 0; k + 1 < n; ++k) {
            if (detail::rows_equal(out.atoms, k, k + 1))
                throw ValidationError("duplicate atom: the support must consist of distinct points");
        }
        return out;
    }

    // Merges exactly-coincident rows before validating. Used where atoms are
    // produced arithmetically (sums of atoms) and collisions are legitimate.
    static EmpiricalDistribution validate_merging(const Eigen::MatrixXd& raw_atoms,
                                                  const Eigen::VectorXd& raw_weights) {
        const Eigen::Index n = raw_atoms.rows();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return detail::row_less(raw_atoms, a, b);
        });
        std::vector<Eigen::Index> keep;
        std::vector<double> mass;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index r = order[static_cast<std::size_t>(i)];
            if (!keep.empty() && detail::rows_equal(raw_atoms, keep.back(), r)) {
                mass.back() += raw_weights[r];
            } else {
                keep.push_back(r);
                mass.push_back(raw_weights[r]);
            }
        }
        Eigen::MatrixXd atoms(static_cast<Eigen::Index>(keep.size()), raw_atoms.cols());
        Eigen::VectorXd weights(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
            atoms.row(static_cast<Eigen::Index>(i)) = raw_atoms.row(keep[i]);
            weights[static_cast<Eigen::Index>(i)] = mass[i];
        }
        return validate(std::move(atoms), std::move(weights));
    }
};

inline EmpiricalDistribution validate_empirical(Eigen::MatrixXd atoms,
                                                Eigen::VectorXd weights) {
    return EmpiricalDistribution::validate(std::move(atoms), std::move(weights));
}

// Uniform-weight convenience overload.
inline EmpiricalDistribution validate_empirical(Eigen::MatrixXd atoms) {
    const Eigen::Index n = atoms.rows();
    if (n < 1) throw ValidationError("empirical distribution needs at least one atom");
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return EmpiricalDistribution::validate(std::move(atoms), std::move(w));
}

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& m, const char* name,
                              double tol = 1e-12) {
    if (m.rows() != m.cols())
        throw ValidationError(std::string(name) + " must be square");
    const double dev = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (dev > tol * scale)
        throw ValidationError(std::string(name) + " is not symmetric (deviation " +
                              std::to_string(dev) + ")");
}

inline void require_positive_definite(const Eigen::MatrixXd& m, const char* name) {
    require_symmetric(m, name);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string(name) + ": eigendecomposition failed");
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError(std::string(name) + " is not positive definite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
}

}  // namespace detail

// The scenario distribution correlated against. Four variants:
// Lebesgue on [0,1]^d, centered Gaussian, a two-point Bernoulli vector
// (mass alpha at (1/alpha,...,1/alpha), the rest at the origin), or an
// arbitrary discrete distribution.
struct BaselineMeasure {
    enum class Kind { UniformCube, Gaussian, BernoulliVector, Empirical };

    Kind kind = Kind::UniformCube;
    Eigen::Index dimension = 1;
    Eigen::MatrixXd sigma;                           // Gaussian only
    double alpha = 0.5;                              // BernoulliVector only
    std::optional<EmpiricalDistribution> discrete;   // Empirical only

    static BaselineMeasure uniform_cube(Eigen::Index d) {
        if (d < 1) throw ValidationError("uniform cube dimension must be positive");
        BaselineMeasure b;
        b.kind = Kind::UniformCube;
        b.dimension = d;
        return b;
    }

    static BaselineMeasure gaussian(Eigen::MatrixXd sigma_u) {
        detail::require_positive_definite(sigma_u, "baseline covariance");
        BaselineMeasure b;
        b.kind = Kind::Gaussian;
        b.dimension = sigma_u.rows();
        b.sigma = std::move(sigma_u);
        return b;
    }

    static BaselineMeasure bernoulli_vector(Eigen::Index d, double alpha) {
        if (d < 1) throw ValidationError("Bernoulli vector dimension must be positive");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("Bernoulli alpha must lie in (0,1)");
        BaselineMeasure b;
        b.kind = Kind::BernoulliVector;
        b.dimension = d;
        b.alpha = alpha;
        return b;
    }

    static BaselineMeasure empirical(EmpiricalDistribution dist) {
        BaselineMeasure b;
        b.kind = Kind::Empirical;
        b.dimension = dist.dim();
        b.discrete = std::move(dist);
        return b;
    }

    Eigen::Index dim() const { return dimension; }

    // Absolutely continuous variants.
    bool continuous() const {
        return kind == Kind::UniformCube || kind == Kind::Gaussian;
    }

    Eigen::VectorXd mean() const {
        switch (kind) {
            case Kind::UniformCube:
                return Eigen::VectorXd::Constant(dimension, 0.5);
            case Kind::Gaussian:
                return Eigen::VectorXd::Zero(dimension);
            case Kind::BernoulliVector:
                // alpha * (1/alpha, ..., 1/alpha)
                return Eigen::VectorXd::Ones(dimension);
            case Kind::Empirical:
                return discrete->atoms.transpose() * discrete->weights;
        }
        throw std::logic_error("unreachable");
    }
};

// Deterministic sampler: the point stream is a pure function of
// (measure, count, seed, stream) and is bit-identical across runs and
// worker counts. Returns count x d, one point per row.
inline Eigen::MatrixXd sample_baseline(const BaselineMeasure& measure,
                                       std::int64_t count, std::uint64_t seed,
                                       std::uint64_t stream = 0) {
    if (count < 1) throw ValidationError("sample count must be positive");
    const Eigen::Index n = static_cast<Eigen::Index>(count);
    const Eigen::Index d = measure.dim();
    Eigen::MatrixXd pts(n, d);
    switch (measure.kind) {
        case BaselineMeasure::Kind::UniformCube: {
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < d; ++i)
                    pts(j, i) = rng::uniform(seed, stream,
                                             static_cast<std::uint64_t>(j * d + i));
            break;
        }
        case BaselineMeasure::Kind::Gaussian: {
            Eigen::LLT<Eigen::MatrixXd> llt(measure.sigma);
            if (llt.info() != Eigen::Success)
                throw NumericalError("baseline covariance is not positive definite");
            const Eigen::MatrixXd L = llt.matrixL();
            Eigen::VectorXd z(d);
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = 0; i < d; ++i)
                    z[i] = rng::standard_normal(seed, stream,
                                                static_cast<std::uint64_t>(j * d + i));
                pts.row(j) = (L * z).transpose();
            }
            break;
        }
        case BaselineMeasure::Kind::BernoulliVector: {
            const double hi = 1.0 / measure.alpha;
            for (Eigen::Index j = 0; j < n; ++j) {
                const bool up = rng::uniform(seed, stream,
                                             static_cast<std::uint64_t>(j)) < measure.alpha;
                pts.row(j).setConstant(up ? hi : 0.0);
            }
            break;
        }
        case BaselineMeasure::Kind::Empirical: {
            const auto& e = *measure.discrete;
            std::vector<double> cum(static_cast<std::size_t>(e.size()));
            double acc = 0.0;
            for (Eigen::Index k = 0; k < e.size(); ++k) {
                acc += e.weights[k];
                cum[static_cast<std::size_t>(k)] = acc;
            }
            cum.back() = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double u = rng::uniform(seed, stream, static_cast<std::uint64_t>(j));
                const auto it = std::upper_bound(cum.begin(), cum.end(), u);
                const Eigen::Index k = static_cast<Eigen::Index>(it - cum.begin());
                pts.row(j) = e.atoms.row(std::min(k, e.size() - 1));
            }
            break;
        }
    }
    return pts;
}

// Dual weights for the semi-discrete problem, one per atom. The potential
// only depends on pairwise differences, so the additive constant is fixed
// by the gauge min_k w_k = 0.
struct DualWeights {
    Eigen::VectorXd values;

    static DualWeights canonical(Eigen::VectorXd raw) {
        if (raw.size() < 1) throw ValidationError("dual weights must be nonempty");
        if (!raw.allFinite()) throw ValidationError("non-finite dual weight");
        raw.array() -= raw.minCoeff();
        DualWeights w;
        w.values = std::move(raw);
        return w;
    }

    static DualWeights zeros(Eigen::Index n) {
        DualWeights w;
        w.values = Eigen::VectorXd::Zero(n);
        return w;
    }
};

// Monte Carlo cell statistics: per-atom mass and barycenter of the
// Laguerre cell under the baseline measure, plus the sampled objective.
// Barycenters of empty cells are flagged undefined (and left NaN).
struct CellStats {
    Eigen::VectorXd masses;        // p_k, sums to 1 exactly over the sample
    Eigen::MatrixXd barycenters;   // n x d
    std::vector<std::uint8_t> defined;
    double objective = 0.0;
    std::int64_t sample_count = 0;
    std::uint64_t seed = 0;
};

// Centered Gaussian risk, N(0, covariance). Nonzero means are handled by
// the risk layer's translation rule, not here.
struct GaussianRisk {
    Eigen::MatrixXd covariance;

    static GaussianRisk validate(Eigen::MatrixXd cov) {
        detail::require_positive_definite(cov, "risk covariance");
        GaussianRisk g;
        g.covariance = std::move(cov);
        return g;
    }

    Eigen::Index dim() const { return covariance.rows(); }
};

}  // namespace maxcorr
