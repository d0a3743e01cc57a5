#include <catch2/catch_amalgamated.hpp>

#include "maxcorr/oracle.hpp"
#include "maxcorr/types.hpp"
#include "test_helpers.hpp"

#include <numeric>

using namespace maxcorr;
using test_helpers::random_target;
using test_helpers::random_weights;

namespace {

EmpiricalDistribution atoms_1d(std::initializer_list<double> vals) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vals.size()), 1);
    Eigen::Index i = 0;
    for (const double v : vals) m(i++, 0) = v;
    return validate_empirical(m);
}

// Comonotone (sorted) coupling of two 1d discrete distributions; optimal for
// the inner-product cost by the rearrangement inequality. Independent oracle
// for the transportation solver.
double sorted_coupling_value_1d(const EmpiricalDistribution& a,
                                const EmpiricalDistribution& b) {
    // atoms are already ascending
    Eigen::Index i = 0, j = 0;
    double ra = a.weights[0], rb = b.weights[0];
    double value = 0.0;
    while (true) {
        const double f = std::min(ra, rb);
        value += f * a.atoms(i, 0) * b.atoms(j, 0);
        ra -= f;
        rb -= f;
        if (ra <= 1e-15 && i + 1 < a.size()) ra = a.weights[++i];
        else if (ra <= 1e-15) ra = 0.0;
        if (rb <= 1e-15 && j + 1 < b.size()) rb = b.weights[++j];
        else if (rb <= 1e-15) rb = 0.0;
        if (ra == 0.0 && rb == 0.0) break;
        if (ra == 0.0 || rb == 0.0) break;  // exhausted (up to rounding)
    }
    return value;
}

}  // namespace

TEST_CASE("1d quantile oracle: uniform baseline block integrals") {
    // two atoms: 0 * int_0^.5 t dt + 1 * int_.5^1 t dt = 0.375
    CHECK(oracle::max_corr_1d_quantile(oracle::Quantile1D::uniform(), atoms_1d({0.0, 1.0})) ==
          Catch::Approx(0.375).margin(1e-15));
    // single atom y: y * int_0^1 t dt = y/2
    CHECK(oracle::max_corr_1d_quantile(oracle::Quantile1D::uniform(), atoms_1d({0.8})) ==
          Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("1d quantile oracle: bernoulli baseline") {
    // top-alpha block picks the largest atom: 2 * (1/0.5) * 0.5 = 2
    CHECK(oracle::max_corr_1d_quantile(oracle::Quantile1D::bernoulli(0.5),
                                       atoms_1d({0.0, 2.0})) ==
          Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("1d quantile oracle: gaussian baseline") {
    // symmetric single atom: quantile integrates to zero
    CHECK(oracle::max_corr_1d_quantile(oracle::Quantile1D::gaussian(1.0), atoms_1d({3.0})) ==
          Catch::Approx(0.0).margin(1e-9));
    // atoms {-1, 1}: 2 sigma int_{1/2}^1 Phi^{-1} = 2 sigma pdf(0) = sigma sqrt(2/pi)
    for (const double sigma : {1.0, 2.5}) {
        const double expected = sigma * std::sqrt(2.0 / M_PI);
        CHECK(oracle::max_corr_1d_quantile(oracle::Quantile1D::gaussian(sigma),
                                           atoms_1d({-1.0, 1.0})) ==
              Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("1d quantile oracle: custom callable agrees with the uniform closed form") {
    const auto target = atoms_1d({-0.5, 0.25, 1.5});
    const double closed =
        oracle::max_corr_1d_quantile(oracle::Quantile1D::uniform(), target);
    const double quad = oracle::max_corr_1d_quantile(
        oracle::Quantile1D::custom([](double t) { return t; }), target);
    CHECK(quad == Catch::Approx(closed).margin(1e-9));
}

TEST_CASE("1d quantile oracle rejects multivariate targets") {
    Eigen::MatrixXd atoms(2, 2);
    atoms << 0.0, 0.0, 1.0, 1.0;
    CHECK_THROWS_AS(
        oracle::max_corr_1d_quantile(oracle::Quantile1D::uniform(), validate_empirical(atoms)),
        ValidationError);
}

TEST_CASE("assignment: pinned small cases") {
    const auto zero_one = atoms_1d({0.0, 1.0});
    const auto res = oracle::max_corr_assignment(zero_one, zero_one);
    CHECK(res.value == Catch::Approx(0.5).margin(1e-15));  // sorted pairing
    REQUIRE(res.permutation.size() == 2);
    CHECK(res.permutation[0] == 0);
    CHECK(res.permutation[1] == 1);

    // identity is optimal against itself: value = mean of |Y_k|^2
    const auto pts = random_target(6, 2, 51, 0);
    const auto self = oracle::max_corr_assignment(pts, pts);
    const double expected = pts.atoms.rowwise().squaredNorm().mean();
    CHECK(self.value == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("assignment algorithm equals exhaustive enumeration") {
    for (std::uint64_t t = 0; t < 30; ++t) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng::uniform_index(52, t, 0, 5));
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng::uniform_index(52, t, 1, 3));
        const auto a = random_target(n, d, 53, 2 * t, -1.0, 1.0);
        const auto b = random_target(n, d, 53, 2 * t + 1, -1.0, 1.0);
        const double ex = oracle::max_corr_assignment(a, b, oracle::Method::Exhaustive).value;
        const double lap = oracle::max_corr_assignment(a, b, oracle::Method::Lap).value;
        CHECK(ex == Catch::Approx(lap).margin(1e-12));
    }
}

TEST_CASE("assignment coupling marginals match the weights") {
    const auto a = random_target(5, 2, 54, 0);
    Eigen::VectorXd wb = random_weights(7, 54, 1);
    const auto b = EmpiricalDistribution::validate(
        test_helpers::random_points(7, 2, 54, 2), wb);
    const auto res = oracle::max_corr_assignment(a, b);
    Eigen::VectorXd row_mass = Eigen::VectorXd::Zero(5);
    Eigen::VectorXd col_mass = Eigen::VectorXd::Zero(7);
    for (const auto& [i, j, f] : res.coupling) {
        row_mass[i] += f;
        col_mass[j] += f;
        CHECK(f > 0.0);
    }
    CHECK((row_mass - a.weights).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((col_mass - b.weights).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("general-weight transportation agrees with the sorted coupling in 1d") {
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng::uniform_index(55, t, 0, 5));
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng::uniform_index(55, t, 1, 5));
        const auto a = EmpiricalDistribution::validate(
            test_helpers::random_points(n, 1, 56, 2 * t, -2.0, 2.0),
            random_weights(n, 57, 2 * t));
        const auto b = EmpiricalDistribution::validate(
            test_helpers::random_points(m, 1, 56, 2 * t + 1, -2.0, 2.0),
            random_weights(m, 57, 2 * t + 1));
        const double via_simplex = oracle::max_corr_assignment(a, b).value;
        const double via_sorted = sorted_coupling_value_1d(a, b);
        CHECK(via_simplex == Catch::Approx(via_sorted).margin(1e-10));
    }
}

TEST_CASE("transportation simplex handles degenerate weights exactly") {
    // weights (1/2, 1/4, 1/4) are equivalent to an expanded equal-weight
    // instance with the heavy row duplicated, which the assignment solver
    // handles; the two routes must agree.
    for (std::uint64_t t = 0; t < 10; ++t) {
        const Eigen::MatrixXd src = test_helpers::random_points(3, 2, 64, 2 * t, -1.0, 1.0);
        const Eigen::MatrixXd tgt = test_helpers::random_points(4, 2, 64, 2 * t + 1, -1.0, 1.0);
        Eigen::MatrixXd profit = src * tgt.transpose();

        Eigen::VectorXd supply(3);
        supply << 0.5, 0.25, 0.25;
        const Eigen::VectorXd demand = Eigen::VectorXd::Constant(4, 0.25);
        const auto plan = oracle::detail_o::transport_simplex_max(profit, supply, demand);

        Eigen::MatrixXd expanded(4, 4);
        expanded.row(0) = profit.row(0);
        expanded.row(1) = profit.row(0);
        expanded.row(2) = profit.row(1);
        expanded.row(3) = profit.row(2);
        const auto perm = oracle::detail_o::lap_min(-expanded);
        double lap_value = 0.0;
        for (int j = 0; j < 4; ++j) lap_value += 0.25 * expanded(perm[static_cast<std::size_t>(j)], j);

        CHECK(plan.value == Catch::Approx(lap_value).margin(1e-12));
    }
}

TEST_CASE("rearrangements never beat the comonotone value") {
    const auto src = random_target(5, 2, 58, 0);
    const auto tgt = random_target(5, 2, 58, 1);
    const double best = oracle::max_corr_assignment(src, tgt).value;
    std::vector<int> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        double v = 0.0;
        for (int i = 0; i < 5; ++i)
            v += src.atoms.row(i).dot(tgt.atoms.row(perm[static_cast<std::size_t>(i)])) / 5.0;
        CHECK(v <= best + 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("neutrality probe: constant second target is exactly additive") {
    const Eigen::Index n = 4;
    Eigen::MatrixXd grid(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) grid(i, 0) = (i + 0.5) / static_cast<double>(n);
    const auto src = validate_empirical(grid);
    const auto ta = random_target(n, 1, 59, 0, -1.0, 1.0);
    // all rearrangements of a constant are the constant itself
    Eigen::MatrixXd shifted = ta.atoms;
    shifted.array() += 0.3;
    const double rho_sum = oracle::max_corr_assignment(src, validate_empirical(shifted)).value;
    const double rho_a = oracle::max_corr_assignment(src, ta).value;
    const double rho_const = 0.3 * 0.5;  // <mean of grid, c>
    CHECK(rho_sum == Catch::Approx(rho_a + rho_const).margin(1e-12));
}

TEST_CASE("neutrality probe: exhaustive search attains rho(A) + rho(B)") {
    SECTION("n = 4, d = 1") {
        const auto src = random_target(4, 1, 60, 0);
        const auto ta = random_target(4, 1, 60, 1, -1.0, 1.0);
        const auto tb = random_target(4, 1, 60, 2, -1.0, 1.0);
        const auto res = oracle::structure_neutrality_probe(src, ta, tb, 0, 1);
        CHECK(res.best_found == Catch::Approx(res.rho_a + res.rho_b).margin(1e-12));
        CHECK(res.best_found <= res.rho_a + res.rho_b + 1e-12);
        CHECK(res.evaluations == 24);  // relative rearrangements of target_b
    }
    SECTION("n = 5, d = 2") {
        const auto src = random_target(5, 2, 61, 0);
        const auto ta = random_target(5, 2, 61, 1, -1.0, 1.0);
        const auto tb = random_target(5, 2, 61, 2, -1.0, 1.0);
        const auto res = oracle::structure_neutrality_probe(src, ta, tb, 0, 1);
        CHECK(res.best_found == Catch::Approx(res.rho_a + res.rho_b).margin(1e-10));
        REQUIRE(res.perm_b.size() == 5);
    }
}

TEST_CASE("neutrality probe: sampled pairs stay within the bound") {
    const auto src = random_target(6, 2, 62, 0);
    const auto ta = random_target(6, 2, 62, 1, -1.0, 1.0);
    const auto tb = random_target(6, 2, 62, 2, -1.0, 1.0);
    const auto res = oracle::structure_neutrality_probe(src, ta, tb, 200, 3);
    CHECK(res.evaluations == 200);
    CHECK(res.best_found <= res.rho_a + res.rho_b + 1e-10);
}

TEST_CASE("neutrality probe validates its preconditions") {
    const auto src = random_target(10, 1, 63, 0);
    const auto ta = random_target(10, 1, 63, 1);
    const auto tb = random_target(10, 1, 63, 2);
    // n = 10 exceeds the exhaustive cap
    CHECK_THROWS_AS(oracle::structure_neutrality_probe(src, ta, tb, 0, 1), ValidationError);
    // but sampling mode works
    CHECK_NOTHROW(oracle::structure_neutrality_probe(src, ta, tb, 10, 1));

    const auto small = random_target(4, 1, 63, 3);
    CHECK_THROWS_AS(oracle::structure_neutrality_probe(src, small, tb, 0, 1),
                    ValidationError);
}
