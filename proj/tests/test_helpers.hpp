#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "maxcorr/rng.hpp"
#include "maxcorr/types.hpp"

namespace test_helpers {

// Random symmetric positive-definite matrix, entries of the factor in [-1,1].
inline Eigen::MatrixXd random_spd(Eigen::Index d, std::uint64_t seed,
                                  std::uint64_t stream, double ridge = 0.05) {
    Eigen::MatrixXd b(d, d);
    std::uint64_t ctr = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            b(i, j) = 2.0 * maxcorr::rng::uniform(seed, stream, ctr++) - 1.0;
    return b * b.transpose() + ridge * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::MatrixXd random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                     std::uint64_t stream, double lo = 0.0, double hi = 1.0) {
    Eigen::MatrixXd pts(n, d);
    std::uint64_t ctr = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            pts(i, j) = lo + (hi - lo) * maxcorr::rng::uniform(seed, stream, ctr++);
    return pts;
}

inline maxcorr::EmpiricalDistribution random_target(Eigen::Index n, Eigen::Index d,
                                                    std::uint64_t seed, std::uint64_t stream,
                                                    double lo = 0.0, double hi = 1.0) {
    return maxcorr::EmpiricalDistribution::validate_merging(
        random_points(n, d, seed, stream, lo, hi),
        Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

// Random positive weights summing to one.
inline Eigen::VectorXd random_weights(Eigen::Index n, std::uint64_t seed,
                                      std::uint64_t stream) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        w[i] = 0.05 + maxcorr::rng::uniform(seed, stream, static_cast<std::uint64_t>(i));
    w /= w.sum();
    return w;
}

}  // namespace test_helpers
