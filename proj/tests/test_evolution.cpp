#include <doctest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "kfp/evolution.hpp"

using namespace kfp;

namespace {

Vec eta1(double x) {
    Vec e(1);
    e(0) = x;
    return e;
}

// composite Simpson for 2 int_0^1 bump(x) cos(eta x) dx
double bump_fourier_simpson(double eta) {
    const int n = 20000;
    const double h = 1.0 / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += w * bump(k * h) * std::cos(eta * k * h);
    }
    return 2.0 * s * h / 3.0;
}

} // namespace

TEST_SUITE("evolution") {

TEST_CASE("space grid and transforms") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    CHECK(sg.spacing() == doctest::Approx(0.5));
    for (long k = 0; k < sg.total(); ++k) {
        const long p = sg.partner(k);
        if (sg.eta(k)(0) != -sg.eta(0)(0) && std::abs(sg.eta(k)(0)) < 0.99 * std::numbers::pi / sg.spacing())
            CHECK(sg.eta(p)(0) == doctest::Approx(-sg.eta(k)(0)));
    }
    std::mt19937_64 rng(1);
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    const Field f = white_noise(ops, sg, 3);
    const Field g = to_field(to_modes(f), ops.grid);
    CHECK((g.values - f.values).norm() <= 1e-12 * f.values.norm());
    CHECK_THROWS_AS(build_space_grid(16.0, 60), ConfigError);
}

TEST_CASE("continuous bump transform") {
    for (double eta : {0.0, 0.7, 3.0, 12.0}) CHECK(bump_fourier(eta) == doctest::Approx(bump_fourier_simpson(eta)).epsilon(1e-9));
    // the discrete transform of the sampled bump converges to the continuous one
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    auto low_mode_error = [&](int n) {
        const SpaceGrid sg = build_space_grid(8.0, n);
        const ModeSet a = to_modes(fluid_bump(ops, sg));
        const ModeSet b = bump_modes_exact(sg, ops.sqrtM);
        double e = 0.0;
        for (long k = 0; k < sg.total(); ++k)
            if (std::abs(sg.eta(k)(0)) <= 10.0) e = std::max(e, (a.coeffs.row(k) - b.coeffs.row(k)).norm());
        return e / b.coeffs.row(0).norm();
    };
    const double e1 = low_mode_error(128), e2 = low_mode_error(256), e3 = low_mode_error(512);
    CHECK(e2 < 0.1 * e1);
    CHECK(e3 < 0.1 * e2);
    CHECK(e3 < 1e-6);
}

TEST_CASE("initial data kinds") {
    const SpaceGrid sg = build_space_grid(8.0, 64);
    const OperatorSet ops = kt::ops_for(1.0, 0.4);
    const Field mb = micro_bump(ops, sg);
    const Field fb = fluid_bump(ops, sg);
    for (long i = 0; i < sg.total(); ++i) {
        const Vec re = mb.values.row(i).real().transpose();
        CHECK(ops.norm(ops.P0(re)) <= 1e-12 * (1.0 + ops.norm(re)));
        const Vec rf = fb.values.row(i).real().transpose();
        CHECK(ops.norm(ops.P1(rf)) <= 1e-12 * (1.0 + ops.norm(rf)));
    }
    CHECK(white_noise(ops, sg, 8).values == white_noise(ops, sg, 8).values);
    CHECK(white_noise(ops, sg, 8).values != white_noise(ops, sg, 9).values);
}

TEST_CASE("exact flow conserves mass and contracts") {
    const SpaceGrid sg = build_space_grid(32.0, 128);
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    const Field f0 = white_noise(ops, sg, 5);
    const ModeSet m0 = to_modes(f0);
    EvolveReport rep;
    const auto snaps = evolve_modes(ops, m0, {0.5, 1.0, 2.0, 4.0}, Scheme::exact(), {}, &rep);
    CHECK(rep.contraction_ok);
    const double mass0 = total_mass(ops, f0);
    double prev = l2_norm(ops, f0);
    for (const auto& s : snaps) {
        const Field f = to_field(s, ops.grid);
        CHECK(std::abs(total_mass(ops, f) - mass0) <= 1e-10 * std::abs(mass0));
        const double n = l2_norm(ops, f);
        CHECK(n <= prev * (1.0 + 1e-12));
        prev = n;
    }
}

TEST_CASE("Crank-Nicolson is second order") {
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    const Vec eta = eta1(0.8);
    std::mt19937_64 rng(6);
    const CVec f = kt::random_cvec(ops.size(), rng);
    const CVec ref = propagate_mode(ops, eta, f, 1.0, Scheme::exact());
    const double e1 = (propagate_mode(ops, eta, f, 1.0, Scheme::cn(1e-2)) - ref).norm();
    const double e2 = (propagate_mode(ops, eta, f, 1.0, Scheme::cn(5e-3)) - ref).norm();
    CHECK(e1 / e2 >= 3.5);
    CHECK(e1 / e2 <= 4.5);
    // CN mass drift is O(dt^2) as well
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const Field f0 = fluid_bump(ops, sg);
    auto drift = [&](double dt) {
        const auto s = evolve_modes(ops, to_modes(f0), {1.0}, Scheme::cn(dt));
        return std::abs(total_mass(ops, to_field(s[0], ops.grid)) - total_mass(ops, f0));
    };
    CHECK(drift(1e-2) <= 1e-10);
}

TEST_CASE("Radau converges to the exact propagator at fifth order") {
    const OperatorSet ops = kt::ops_for(1.0, 0.4);
    std::mt19937_64 rng(7);
    const CVec f = kt::random_cvec(ops.size(), rng);
    for (bool damped : {false, true})
        for (double eta : {0.5, 1.0}) {
            auto prop = damped ? propagate_mode_damped : propagate_mode;
            const CVec a = prop(ops, eta1(eta), f, 2.0, Scheme::exact());
            const double e1 = (prop(ops, eta1(eta), f, 2.0, Scheme::radau(0.025)) - a).norm();
            const double e2 = (prop(ops, eta1(eta), f, 2.0, Scheme::radau(0.0125)) - a).norm();
            CHECK(e2 <= 2e-4 * f.norm());
            CHECK(e1 / e2 > 20.0);
        }
    // smooth data is resolved with coarse steps
    const Vec g = ops.sqrtM;
    const CVec a = propagate_mode(ops, eta1(1.5), g.cast<cplx>(), 10.0, Scheme::exact());
    const CVec b = propagate_mode(ops, eta1(1.5), g.cast<cplx>(), 10.0, Scheme::radau(0.25));
    CHECK((a - b).norm() <= 1e-3 * a.norm());
}

TEST_CASE("per-mode energy identity") {
    const OperatorSet ops = kt::ops_for(2.0, 0.2);
    const double nu0 = coercivity_constant(ops);
    std::mt19937_64 rng(8);
    CVec f = kt::random_cvec(ops.size(), rng);
    const Vec eta = eta1(1.3);
    const double dt = 1e-3;
    const ModePropagator mp(ops, eta, false, Scheme::exact());
    const double scale = ops.norm(f) * ops.norm(f);
    auto diss = [&](const CVec& g) {
        const CVec p = ops.P1(g);
        const double a = sigma_norm(ops, Vec(p.real())), b = sigma_norm(ops, Vec(p.imag()));
        return a * a + b * b;
    };
    for (int n = 0; n < 50; ++n) {
        const CVec g = mp.advance(f, dt);
        const double de = 0.5 * (std::pow(ops.norm(g), 2) - std::pow(ops.norm(f), 2));
        CHECK(de + nu0 * 0.5 * (diss(f) + diss(g)) * dt <= 1e-6 * scale);
        f = g;
    }
}

TEST_CASE("results do not depend on the thread count") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    const ModeSet m0 = to_modes(white_noise(ops, sg, 12));
    EvolveOptions o1, o3;
    o3.threads = 3;
    for (const Scheme& s : {Scheme::exact(), Scheme::radau(0.25)}) {
        const auto a = evolve_modes(ops, m0, {1.0, 2.0}, s, o1);
        const auto b = evolve_modes(ops, m0, {1.0, 2.0}, s, o3);
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k].coeffs == b[k].coeffs);
    }
}

TEST_CASE("argument checks") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    const OperatorSet ops = kt::ops_for(1.0, 0.4);
    const ModeSet m0 = to_modes(fluid_bump(ops, sg));
    CHECK_THROWS_AS(evolve_modes(ops, m0, {10.0}, Scheme::exact()), ConfigError); // 2 M t >= 0.8 l_x
    CHECK_THROWS_AS(evolve_modes(ops, m0, {0.3}, Scheme::cn(0.25)), ConfigError);
    CHECK_THROWS_AS(evolve_modes(ops, m0, {2.0, 1.0}, Scheme::exact()), ConfigError);
    CHECK_THROWS_AS(parse_scheme("rk4", 0.1), ConfigError);
    CHECK_THROWS_AS(parse_scheme("cn", 0.0), ConfigError);
}

TEST_CASE("wave speed calibration") {
    const SpaceGrid sg = build_space_grid(64.0, 256);
    const OperatorSet ops = kt::ops_for(2.0, 0.4);
    const ModeSet m0 = to_modes(fluid_bump(ops, sg));
    std::vector<TailProfile> prof;
    for (const auto& s : evolve_modes(ops, m0, {5.0, 10.0}, Scheme::exact()))
        prof.push_back(tail_profile(ops, to_field(s, ops.grid)));
    const double M = calibrate_wave_speed(sg, prof);
    CHECK(M > 0.0);
    CHECK(M < 2.0);
}

}
