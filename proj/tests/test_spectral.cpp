#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "kfp/evolution.hpp"
#include "kfp/spectral.hpp"
#include "kfp/tridiag.hpp"

using namespace kfp;

namespace {

// a = int F^2 / M dv with F(v) = int_{-inf}^v u M(u) du, adaptive quadrature (scipy, rel. 1e-11)
constexpr double kA1 = 8.098451806781316;
constexpr double kA32 = 2.1323044859492315;

Vec e1() {
    Vec e = Vec::Zero(1);
    e(0) = 1.0;
    return e;
}

Vec eta1(double x) {
    Vec e(1);
    e(0) = x;
    return e;
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("diffusion coefficient, quadratic potential") {
    const double h = 0.2;
    const DiffusionData d = diffusion_coefficient(kt::ops_for(2.0, h), e1());
    CHECK(std::abs(d.a_gamma - 1.0) <= 2.0 * h * h);
    CHECK(d.agreement < 0.01);
}

TEST_CASE("diffusion coefficient against quadrature") {
    for (auto [g, ref] : {std::pair{1.0, kA1}, std::pair{1.5, kA32}}) {
        const double e2 = std::abs(diffusion_coefficient(kt::ops_for(g, 0.2), e1()).a_gamma - ref);
        const double e4 = std::abs(diffusion_coefficient(kt::ops_for(g, 0.4), e1()).a_gamma - ref);
        CHECK(e2 / ref < 0.04 * 0.04 * 4);
        CHECK(e4 / e2 == doctest::Approx(4.0).epsilon(0.15));
    }
}

TEST_CASE("long-wave branch is real and even") {
    for (double g : {1.0, 2.0}) {
        const OperatorSet ops = kt::ops_for(g, g == 1.0 ? 0.4 : 0.2);
        const double delta = default_delta(ops);
        std::vector<double> etas;
        for (int k = 0; k <= 8; ++k) etas.push_back(0.95 * delta * k / 8.0);
        const auto br = eigen_branch(ops, etas);
        for (const auto& d : br) {
            CHECK(std::abs(d.lambda.imag()) <= 1e-10);
            const ModeEigenData m = leading_eigenpair(ops, eta1(-d.eta(0)));
            CHECK(std::abs(m.lambda - d.lambda) <= 1e-10);
        }
        for (size_t k = 1; k < br.size(); ++k) CHECK(br[k].lambda.real() < br[k - 1].lambda.real());
    }
}

TEST_CASE("quartic remainder of the branch") {
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    const DiffusionData dd = diffusion_coefficient(ops, e1());
    std::vector<double> c;
    for (double eta = 0.2; eta > 0.01; eta *= 0.5) {
        const cplx lam = leading_eigenpair(ops, eta1(eta)).lambda;
        c.push_back(std::abs(lam.real() + dd.a_gamma * eta * eta) / std::pow(eta, 4));
    }
    for (size_t k = 1; k < c.size(); ++k) CHECK(c[k] == doctest::Approx(c[0]).epsilon(0.1));
    // e_D = sqrtM + i eta E_D1 + O(eta^2)
    const double e2 = expansion_check(ops, eta1(0.05), dd), e1 = expansion_check(ops, eta1(0.1), dd);
    CHECK(e2 == doctest::Approx(e1).epsilon(0.1));
}

TEST_CASE("rank-one projector") {
    std::mt19937_64 rng(2);
    const OperatorSet ops = kt::ops_for(1.0, 0.2);
    const Vec eta = eta1(0.3);
    const CSpMat Le = assemble_L_eta(ops, eta);
    const ModeEigenData ed = leading_eigenpair(ops, Le);
    const CVec f = kt::random_cvec(ops.size(), rng);
    const CVec p = apply_projector(ops, ed, f);
    const double n = f.norm();
    CHECK((apply_projector(ops, ed, p) - p).norm() <= 1e-8 * n);
    CHECK((Le * p - ed.lambda * p).norm() <= 1e-8 * n * std::abs(ed.lambda) + 1e-8 * n);
    const CVec lf = Le * f;
    CHECK((apply_projector(ops, ed, lf) - ed.lambda * p).norm() <= 1e-8 * lf.norm());

    // the complement stays complementary under the exact flow
    const CVec perp = f - p;
    for (double t : {0.1, 0.5}) {
        const CVec ft = propagate_mode(ops, eta, perp, t, Scheme::exact());
        CHECK(apply_projector(ops, ed, ft).norm() <= 1e-8 * n);
    }
}

TEST_CASE("spectral gap away from the branch") {
    for (double g : {1.0, 2.0}) {
        const OperatorSet ops = kt::ops_for(g, g == 1.0 ? 0.4 : 0.2);
        const double delta = default_delta(ops);
        std::vector<Vec> etas;
        for (int k = 0; k <= 25; ++k) etas.push_back(eta1(5.0 * k / 25.0));
        const GapScan gs = gap_scan(ops, etas, delta);
        CHECK(gs.tau > 0.0);
        CHECK_FALSE(gs.no_theory);
        for (const auto& r : gs.rows)
            if (r.eta_abs >= delta) CHECK(r.top_re <= -gs.tau + 1e-12);
    }
}

TEST_CASE("weak confinement carries the no-theory flag") {
    const OperatorSet ops = kt::ops_for(0.5, 3.0);
    const GapScan gs = gap_scan(ops, {eta1(0.0), eta1(1.0)}, 0.1);
    CHECK(gs.no_theory);
}

TEST_CASE("fluid reduction agrees with the eigensolver") {
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    for (double eta : {0.1, 0.3}) {
        const cplx a = fluid_reduction_solve(ops, eta);
        const cplx b = leading_eigenpair(ops, eta1(eta)).lambda;
        CHECK(std::abs(a - b) <= 1e-8 * (1.0 + std::abs(b)));
    }
}

TEST_CASE("Radau stability function") {
    const RationalPF& pf = radau_partial_fractions();
    for (cplx z : {cplx(-0.3, 0.0), cplx(-2.0, 1.5), cplx(-40.0, -7.0), cplx(0.0, 3.0)}) {
        cplx r = 0.0;
        for (int j = 0; j < 3; ++j) r += pf.residues[j] / (z - pf.poles[j]);
        const cplx pade = (1.0 + 0.4 * z + z * z / 20.0) / (1.0 - 0.6 * z + 0.15 * z * z - z * z * z / 60.0);
        CHECK(std::abs(r - pade) <= 1e-13 * (1.0 + std::abs(pade)));
    }
}

TEST_CASE("tridiagonal solve") {
    std::mt19937_64 rng(4);
    const OperatorSet ops = kt::ops_for(1.0, 0.2);
    CSpMat A = assemble_L_eta(ops, eta1(0.7));
    CSpMat I(A.rows(), A.cols());
    I.setIdentity();
    A = CSpMat(I * cplx(2.0, 0.5)) - A;
    Tridiagonal t = Tridiagonal::from_sparse(A);
    const CVec x = kt::random_cvec(ops.size(), rng);
    CHECK((t.apply(x) - A * x).norm() <= 1e-12 * (A * x).norm());
    CVec b = A * x;
    t.factor();
    t.solve(b);
    CHECK((b - x).norm() <= 1e-10 * x.norm());
}

}
