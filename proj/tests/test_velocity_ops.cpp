#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "kfp/functionals.hpp"

using namespace kfp;

namespace {

// log of int exp(-<v>^gamma/gamma) dv on the real line, adaptive quadrature (scipy, rel. 1e-13)
struct Phi0Ref {
    double gamma, phi0;
};
constexpr Phi0Ref kPhi0[] = {{2.0, 0.41893853320467267},
                             {1.5, 0.3616869454016633},
                             {1.0, 0.185495232349193},
                             {0.75, -0.033889684848066114},
                             {0.5, -0.5360714136202818}};

double kernel_ratio_literal(double gamma, double v_max, int n) {
    PotentialParams p;
    p.gamma = gamma;
    double prev = 0.0, ratio = 0.0;
    for (int k = 0; k < 2; ++k) {
        const int m = (n - 1) * (1 << k) + 1;
        const VelocityGrid g = build_grid(v_max, m, 1);
        const Maxwellian mw = maxwellian(g, p);
        const SpMat L = assemble_L_literal(g, p);
        const double r = (L * mw.sqrtM).norm() / mw.sqrtM.norm();
        if (k == 1) ratio = prev / r;
        prev = r;
    }
    return ratio;
}

} // namespace

TEST_SUITE("velocity_ops") {

TEST_CASE("normalizing constant matches quadrature") {
    for (const auto& r : kPhi0) {
        const OperatorSet ops = kt::ops_for(r.gamma, 0.2);
        CHECK(ops.params.phi0 == doctest::Approx(r.phi0).epsilon(1e-9));
        CHECK(ops.cell() * ops.sqrtM.squaredNorm() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("structured kernel is exact") {
    for (double g : {0.5, 1.0, 1.5, 2.0}) {
        const OperatorSet ops = kt::ops_for(g, g < 1 ? 0.5 : 0.2);
        CHECK(ops.norm(Vec(ops.L * ops.sqrtM)) / ops.norm(ops.sqrtM) < 1e-10);
    }
}

TEST_CASE("literal kernel residual is second order") {
    for (double g : {1.0, 2.0}) {
        const double r = kernel_ratio_literal(g, g == 2.0 ? 10.0 : 46.0, 201);
        CHECK(r > 3.4);
        CHECK(r < 4.6);
    }
}

TEST_CASE("symmetric and negative semidefinite") {
    std::mt19937_64 rng(11);
    for (double g : {0.5, 1.0, 2.0}) {
        const OperatorSet ops = kt::ops_for(g, g < 1 ? 0.5 : 0.2);
        CHECK(symmetry_defect(ops.L) <= 1e-12);
        CHECK(max_rayleigh(ops.L) <= 1e-8);
        for (int k = 0; k < 100; ++k) {
            const Vec f = kt::random_vec(ops.size(), rng);
            CHECK(ops.inner(ops.L * f, f) <= 1e-8 * ops.inner(f, f));
        }
    }
}

TEST_CASE("harmonic oscillator ladder") {
    // gamma = 2: L = d^2/dv^2 - v^2/4 + 1/2 has eigenvalues 0, -1, -2, ...
    double err_prev = 0.0;
    for (double h : {0.2, 0.1}) {
        const OperatorSet ops = kt::ops_for(2.0, h);
        Eigen::SelfAdjointEigenSolver<Mat> es{Mat(ops.L)};
        const Vec ev = es.eigenvalues().reverse();
        CHECK(std::abs(ev(0)) < 1e-10);
        double err = 0.0;
        for (int k = 1; k < 3; ++k) err = std::max(err, std::abs(ev(k) + k));
        CHECK(err < 2.0 * h * h);
        if (err_prev > 0.0) CHECK(err_prev / err == doctest::Approx(4.0).epsilon(0.15));
        err_prev = err;
    }
}

TEST_CASE("coercivity on the microscopic range") {
    std::mt19937_64 rng(5);
    for (double g : {0.5, 1.0, 1.5, 2.0}) {
        const OperatorSet ops = kt::ops_for(g, g < 1 ? 1.0 : 0.2);
        const double nu0 = coercivity_constant(ops);
        CHECK(nu0 > 0.0);
        for (int k = 0; k < 50; ++k) {
            const Vec f = kt::random_vec(ops.size(), rng);
            const double s = sigma_norm(ops, ops.P1(f));
            CHECK(-ops.inner(ops.L * f, f) >= nu0 * s * s * (1.0 - 1e-10));
        }
    }
}

TEST_CASE("macro-micro projections") {
    std::mt19937_64 rng(3);
    const OperatorSet ops = kt::ops_for(1.0, 0.2);
    const Vec f = kt::random_vec(ops.size(), rng);
    CHECK((ops.P0(ops.P0(f)) - ops.P0(f)).norm() < 1e-12 * f.norm());
    CHECK((ops.P0(f) + ops.P1(f) - f).norm() < 1e-12 * f.norm());
    CHECK(std::abs(ops.inner(ops.P0(f), ops.P1(f))) < 1e-12 * ops.inner(f, f));
    CHECK((ops.P0(ops.sqrtM) - ops.sqrtM).norm() < 1e-12);
}

TEST_CASE("K is bounded by the cutoff strength in every weight") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const OperatorSet ops = kt::ops_for(1.0, 0.2);
    const double w = ops.params.cutoff_strength;
    CHECK(ops.K.maxCoeff() <= w);
    CHECK(ops.K.minCoeff() >= 0.0);
    for (auto kind : {WeightKind::Unit, WeightKind::ExpC}) {
        WeightParams wp;
        wp.kind = kind;
        const int nx = 32;
        double kg = 0.0, gg = 0.0;
        for (int i = 0; i < nx; ++i) {
            const double x = 2.0 * i;
            for (int j = 0; j < ops.size(); ++j) {
                const double g = u(rng) - 0.5;
                const double mu = weight_mu(wp, 1.0, x, ops.grid.nodes(j, 0) * ops.grid.nodes(j, 0));
                kg += ops.K(j) * g * g * mu;
                gg += g * g * mu;
            }
        }
        CHECK(kg <= w * gg);
    }
    // exp_x needs gamma >= 3/2
    const OperatorSet o2 = kt::ops_for(2.0, 0.2);
    WeightParams wp;
    wp.kind = WeightKind::ExpX;
    double kg = 0.0, gg = 0.0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < o2.size(); ++j) {
            const double g = u(rng) - 0.5;
            const double mu = weight_mu(wp, 2.0, 1.5 * i, 0.0);
            kg += o2.K(j) * g * g * mu;
            gg += g * g * mu;
        }
    CHECK(kg <= o2.params.cutoff_strength * gg);
}

TEST_CASE("too small a velocity box is rejected") {
    PotentialParams p;
    p.gamma = 0.5;
    CHECK_THROWS_AS(build_operator_set(build_grid(2.0, 41, 1), p), ConfigError);
    CHECK_THROWS_AS(build_grid(8.0, 40, 1), ConfigError);
}

TEST_CASE("two dimensions") {
    const OperatorSet ops = kt::ops_for(2.0, 0.4, 2);
    CHECK(ops.size() == ops.grid.n_per_axis * ops.grid.n_per_axis);
    CHECK(ops.norm(Vec(ops.L * ops.sqrtM)) < 1e-10);
    CHECK(symmetry_defect(ops.L) <= 1e-12);
    CHECK(ops.cell() * ops.sqrtM.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
}

}
