#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "kfp/decompose.hpp"

using namespace kfp;

TEST_SUITE("decompose") {

TEST_CASE("long-wave partition is exact") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    const ModeSet m = to_modes(white_noise(ops, sg, 2));
    const auto [L, S] = longwave_split(m, 0.8);
    CHECK((L.coeffs + S.coeffs - m.coeffs).cwiseAbs().maxCoeff() == 0.0);
    for (long k = 0; k < sg.total(); ++k) {
        if (sg.eta(k).norm() < 0.8) CHECK(S.coeffs.row(k).norm() == 0.0);
        else CHECK(L.coeffs.row(k).norm() == 0.0);
    }
}

TEST_CASE("fluid split per mode") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    const double delta = default_delta(ops);
    const EigenMap eig = longwave_eigendata(ops, sg, delta);
    const ModeSet m = to_modes(white_noise(ops, sg, 4));
    const auto [L, S] = longwave_split(m, delta);
    const auto [F, P] = fluid_split(ops, L, eig);
    CHECK((F.coeffs + P.coeffs - L.coeffs).norm() <= 1e-12 * L.coeffs.norm());
    const auto [F2, P2] = fluid_split(ops, F, eig);
    CHECK((F2.coeffs - F.coeffs).norm() <= 1e-8 * F.coeffs.norm());
    CHECK(P2.coeffs.norm() <= 1e-8 * F.coeffs.norm());
    // partner modes carry conjugate eigendata
    for (const auto& [k, ed] : eig) {
        const long p = sg.partner(k);
        REQUIRE(eig.count(p));
        CHECK(std::abs(eig.at(p).lambda - std::conj(ed.lambda)) <= 1e-12);
    }
    CHECK_THROWS_AS(fluid_split(ops, L, EigenMap{}), NumericalError);
}

TEST_CASE("microscopic data has a small fluid part") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    const double delta = 0.5;
    const EigenMap eig = longwave_eigendata(ops, sg, delta);
    const ModeSet mb = to_modes(micro_bump(ops, sg));
    const ModeSet fb = to_modes(fluid_bump(ops, sg));
    // the fluid eigenfunction tilts into P1 only at order |eta|
    for (const auto& [k, ed] : eig) {
        const double r = sg.eta(k).norm();
        const CVec m = mb.coeffs.row(k).transpose(), f = fb.coeffs.row(k).transpose();
        CHECK(ops.norm(apply_projector(ops, ed, m)) <= 2.0 * r * ops.norm(m) + 1e-14);
        CHECK(ops.norm(CVec(f - apply_projector(ops, ed, f))) <= 2.0 * r * ops.norm(f) + 1e-14);
    }
    const SpectralSplit s = spectral_split(ops, mb, delta, eig);
    CHECK(l2_norm(ops, s.f_L0) <= delta * l2_norm(ops, s.f_L));
}

TEST_CASE("wave-remainder split") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(0.5, 1.0);
    const ModeSet m0 = to_modes(white_noise(ops, sg, 6));
    const std::vector<double> ts = {0.05, 0.1, 0.2, 0.5, 1.0};
    const auto parts = picard_waves(ops, m0, ts, Scheme::radau(0.05));
    const double f0 = mode_norm(m0, ops);
    const double w = ops.params.cutoff_strength;
    double fact = 1.0;
    for (const auto& p : parts) {
        CHECK(p.split_residual <= 1e-10);
        CHECK(p.consistency_residual <= 1e-8);
        fact = 1.0;
        for (int j = 0; j < 4; ++j) {
            if (j > 0) fact *= j;
            // contractive damped flow and 0 <= K <= w give |h_j(t)| <= (w t)^j / j! |f0|
            CHECK(mode_norm(p.h[j], ops) <= std::pow(w * p.time, j) / fact * f0 * (1.0 + 1e-8));
        }
    }
    // R3 vanishes to fourth order at t = 0: with contractive flows and 0 <= K <= w,
    // |d_x R3(t)| <= (w t)^4 / 4! |d_x f0|, while d_x h0 keeps the roughness of the data
    const double g0 = mode_norm(m0, ops, 1);
    for (const auto& p : parts) {
        CHECK(mode_norm(p.R3, ops, 1) <= std::pow(w * p.time, 4) / 24.0 * g0 * (1.0 + 1e-8));
        CHECK(mode_norm(p.h[0], ops, 1) <= g0 * (1.0 + 1e-8));
    }
    CHECK(mode_norm(parts[0].R3, ops, 1) <= 1e-2 * mode_norm(parts[0].h[0], ops, 1));
    const auto tab = derivative_growth_table(ops, parts, 1);
    CHECK(tab.size() == 4 * parts.size());
    CHECK_THROWS_AS(derivative_growth_table(ops, parts, 3), ConfigError);
    CHECK_THROWS_AS(picard_waves(ops, m0, ts, Scheme::exact()), ConfigError);
}

TEST_CASE("Parseval") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(1.0, 0.4);
    const Field f = white_noise(ops, sg, 1);
    CHECK(mode_norm(to_modes(f), ops) == doctest::Approx(l2_norm(ops, f)).epsilon(1e-12));
}

}
