#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "maxcorr/types.hpp"

// Closed forms for centered Gaussian risks: the symmetric positive
// semidefinite transport map between N(0, S_u) and N(0, S_x), the maximal
// correlation value, and the cross-covariance criterion for comonotonicity.

namespace maxcorr::gaussian {

// Symmetric matrix with eigenvalues clamped at zero. Eigenvalues below
// -1e-10 are treated as genuine indefiniteness and rejected.
struct SymmetricPsdMatrix {
    Eigen::MatrixXd entries;

    Eigen::Index dim() const { return entries.rows(); }

    static SymmetricPsdMatrix from(const Eigen::MatrixXd& raw) {
        detail::require_symmetric(raw, "matrix");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(raw);
        if (es.info() != Eigen::Success)
            throw NumericalError("eigendecomposition failed");
        Eigen::VectorXd lam = es.eigenvalues();
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            if (lam[i] < -1e-10)
                throw NumericalError("matrix is not positive semidefinite (eigenvalue " +
                                     std::to_string(lam[i]) + ")");
            if (lam[i] < 0.0) lam[i] = 0.0;
        }
        SymmetricPsdMatrix out;
        out.entries = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
        out.entries = 0.5 * (out.entries + out.entries.transpose()).eval();
        return out;
    }
};

namespace detail_g {

struct EigenPair {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;  // clamped at zero
};

inline EigenPair clamped_eigs(const Eigen::MatrixXd& s, const char* name) {
    maxcorr::detail::require_symmetric(s, name);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string(name) + ": eigendecomposition failed");
    EigenPair p;
    p.vectors = es.eigenvectors();
    p.values = es.eigenvalues();
    for (Eigen::Index i = 0; i < p.values.size(); ++i) {
        if (p.values[i] < -1e-10)
            throw NumericalError(std::string(name) +
                                 " is not positive semidefinite (eigenvalue " +
                                 std::to_string(p.values[i]) + ")");
        if (p.values[i] < 0.0) p.values[i] = 0.0;
    }
    return p;
}

inline Eigen::MatrixXd symmetrize(Eigen::MatrixXd m) {
    return 0.5 * (m + m.transpose().eval());
}

}  // namespace detail_g

// Unique symmetric PSD root R with R*R = S, by symmetric eigendecomposition.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& s) {
    auto p = detail_g::clamped_eigs(s, "sqrt argument");
    return detail_g::symmetrize(p.vectors * p.values.cwiseSqrt().asDiagonal() *
                                p.vectors.transpose());
}

inline Eigen::MatrixXd sqrt_psd(const SymmetricPsdMatrix& s) { return sqrt_psd(s.entries); }

namespace detail_g {

// S^{-1/2} for strictly positive definite S.
inline Eigen::MatrixXd inv_sqrt_pd(const Eigen::MatrixXd& s, const char* name) {
    auto p = clamped_eigs(s, name);
    const double lmax = p.values.maxCoeff();
    if (p.values.minCoeff() <= 1e-13 * std::max(1.0, lmax))
        throw NumericalError(std::string(name) + " is singular or nearly so");
    return symmetrize(p.vectors * p.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                      p.vectors.transpose());
}

inline void require_same_dim(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const char* what) {
    if (a.rows() != b.rows())
        throw ValidationError(std::string("dimension mismatch in ") + what + ": " +
                              std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
}

}  // namespace detail_g

// The linear map A with A # N(0, sigma_u) = N(0, sigma_x):
//   A = S_u^{-1/2} (S_u^{1/2} S_x S_u^{1/2})^{1/2} S_u^{-1/2}.
// A is symmetric PSD, i.e. the gradient of the convex form u -> u'Au/2.
inline Eigen::MatrixXd brenier_map_gaussian(const Eigen::MatrixXd& sigma_u,
                                            const Eigen::MatrixXd& sigma_x) {
    detail_g::require_same_dim(sigma_u, sigma_x, "brenier_map_gaussian");
    const Eigen::MatrixXd su_half = sqrt_psd(sigma_u);
    const Eigen::MatrixXd su_invhalf = detail_g::inv_sqrt_pd(sigma_u, "baseline covariance");
    const Eigen::MatrixXd inner = sqrt_psd(detail_g::symmetrize(su_half * sigma_x * su_half));
    return detail_g::symmetrize(su_invhalf * inner * su_invhalf);
}

// Maximal correlation of N(0, sigma_x) against baseline N(0, sigma_u):
//   tr[(S_u^{1/2} S_x S_u^{1/2})^{1/2}].
inline double max_corr_gaussian(const Eigen::MatrixXd& sigma_u,
                                const Eigen::MatrixXd& sigma_x) {
    detail_g::require_same_dim(sigma_u, sigma_x, "max_corr_gaussian");
    const Eigen::MatrixXd su_half = sqrt_psd(sigma_u);
    auto p = detail_g::clamped_eigs(detail_g::symmetrize(su_half * sigma_x * su_half),
                                    "conjugated risk covariance");
    return p.values.cwiseSqrt().sum();
}

// Cross-covariance E[XY'] of the unique mu-comonotonic Gaussian pair with the
// given marginals. Marginals must be invertible.
inline Eigen::MatrixXd comonotone_cross_cov(const Eigen::MatrixXd& sigma_u,
                                            const Eigen::MatrixXd& sigma_x,
                                            const Eigen::MatrixXd& sigma_y) {
    detail_g::require_same_dim(sigma_u, sigma_x, "comonotone_cross_cov");
    detail_g::require_same_dim(sigma_u, sigma_y, "comonotone_cross_cov");
    for (const auto* m : {&sigma_x, &sigma_y}) {
        auto p = detail_g::clamped_eigs(*m, "marginal covariance");
        if (p.values.minCoeff() <= 1e-13 * std::max(1.0, p.values.maxCoeff()))
            throw NumericalError("marginal covariance is singular; the comonotone "
                                 "cross-covariance criterion requires invertible marginals");
    }
    const Eigen::MatrixXd su_half = sqrt_psd(sigma_u);
    const Eigen::MatrixXd su_invhalf = detail_g::inv_sqrt_pd(sigma_u, "baseline covariance");
    const Eigen::MatrixXd rx = sqrt_psd(detail_g::symmetrize(su_half * sigma_x * su_half));
    const Eigen::MatrixXd ry = sqrt_psd(detail_g::symmetrize(su_half * sigma_y * su_half));
    return su_invhalf * rx * ry * su_invhalf;
}

// True iff the observed cross-covariance matches the comonotone one in
// max-abs norm within tol.
inline bool is_gaussian_comonotonic(const Eigen::MatrixXd& sigma_u,
                                    const Eigen::MatrixXd& sigma_x,
                                    const Eigen::MatrixXd& sigma_y,
                                    const Eigen::MatrixXd& observed_cross_cov,
                                    double tol) {
    if (tol <= 0.0) throw ValidationError("tolerance must be positive");
    const Eigen::MatrixXd expected = comonotone_cross_cov(sigma_u, sigma_x, sigma_y);
    detail_g::require_same_dim(expected, observed_cross_cov, "is_gaussian_comonotonic");
    return (observed_cross_cov - expected).cwiseAbs().maxCoeff() <= tol;
}

// Mean-centered sample covariance, divisor N-1. CLI helper.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& points) {
    if (points.rows() < 2) throw ValidationError("sample covariance needs at least two rows");
    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(points.rows() - 1);
}

}  // namespace maxcorr::gaussian
