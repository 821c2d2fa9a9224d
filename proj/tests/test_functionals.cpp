#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "kfp/evolution.hpp"
#include "kfp/functionals.hpp"

using namespace kfp;

namespace {

Vec eta1(double x) {
    Vec e(1);
    e(0) = x;
    return e;
}

// sup of E^{(j+1)/j} / (|f|^2_{L^2_{gamma-1}} Etilde^{1/j}) for gamma = 1/2, h = 1,
// eta = 1/2, kappa = 0.1, alpha_weight = 0.02; point masses, white noise and
// random Gaussians (seed 1), rounded up
constexpr double kInterpC[] = {470.0, 505.0, 518.0};

// sup of |d_v c| / (<v>^{gamma-1} (1 + |chi'|)) over gamma in [1/2, 5/4], delta = 1/2
constexpr double kGradC = 6.6;

std::vector<CVec> mode_trajectory(const OperatorSet& ops, const Vec& eta, CVec f, double dt, int steps) {
    const ModePropagator mp(ops, eta, false, Scheme::radau(dt));
    std::vector<CVec> tr{f};
    for (int i = 0; i < steps; ++i) tr.push_back(f = mp.advance(f, dt));
    return tr;
}

} // namespace

TEST_SUITE("functionals") {

TEST_CASE("Lyapunov functionals decay along weak-confinement trajectories") {
    const OperatorSet ops = kt::ops_for(0.5, 1.0);
    Vec f0(ops.size());
    for (int i = 0; i < ops.size(); ++i) {
        const double v = ops.grid.nodes(i, 0);
        f0(i) = (1.0 + v + 0.5 * v * v) * ops.sqrtM(i);
    }
    for (double eta : {0.05, 0.3, 1.0, 3.0}) {
        const auto tr = mode_trajectory(ops, eta1(eta), f0.cast<cplx>(), 0.05, 100);
        const LyapunovCheck en = check_E_N(ops, eta1(eta), tr, 0.05);
        CHECK(en.max_defect <= 1e-10);
        CHECK(en.equivalence_min >= 0.5);
        CHECK(en.equivalence_max <= 2.0);
        CHECK(en.sigma_measured > 0.0);
        const LyapunovCheck el = check_EL(ops, eta1(eta), tr, 0.05, 0.02);
        CHECK(el.max_defect <= 1e-10);
        CHECK(el.equivalence_min >= 0.5);
        CHECK(el.equivalence_max <= 2.0);
    }
    CHECK_THROWS_AS(check_EL(ops, eta1(1.0), mode_trajectory(ops, eta1(1.0), f0.cast<cplx>(), 0.05, 2), 0.05, 0.2),
                    ConfigError);
}

TEST_CASE("interpolation chain") {
    const OperatorSet ops = kt::ops_for(0.5, 1.0);
    const Vec eta = eta1(0.5);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-500.0, 500.0);
    for (int j = 1; j <= 3; ++j)
        for (int k = 0; k < 200; ++k) {
            CVec f;
            if (k % 2) f = kt::random_cvec(ops.size(), rng);
            else {
                const double c = u(rng), w = std::exp(2.0 * g(rng));
                f.resize(ops.size());
                for (int i = 0; i < f.size(); ++i) {
                    const double v = ops.grid.nodes(i, 0);
                    f(i) = std::exp(-(v - c) * (v - c) / (2.0 * w * w));
                }
                if (f.norm() < 1e-100) continue;
                f /= f.norm();
            }
            const double E = kawashima_E(ops, eta, f, 0.1);
            const double Et = kawashima_E_tilde(ops, eta, f, 0.1, 0.1, 0.1, 0.02);
            const double n = weighted_v_norm2(ops, f, -0.5, 0.0);
            CHECK(std::pow(E, (j + 1.0) / j) <= kInterpC[j - 1] * n * std::pow(Et, 1.0 / j));
        }
}

TEST_CASE("moving weight") {
    const double g = 0.75, delta = 0.5, M = 2.0;
    for (double x : {0.0, 3.0, 40.0, 400.0})
        for (double v : {0.0, 1.5, 9.0, 60.0}) {
            CHECK(weight_rho(0.0, x, v * v, g, delta, M) == weight_c(x, v * v, g, delta));
            double prev = weight_rho(0.0, x, v * v, g, delta, M);
            for (double t = 0.5; t <= 200.0; t += 0.5) {
                const double r = weight_rho(t, x, v * v, g, delta, M);
                CHECK(r <= prev * (1.0 + 1e-14));
                prev = r;
            }
            CHECK(weight_w(1.0, x, 4.0, M) <= weight_w(0.0, x, 4.0, M));
        }
}

TEST_CASE("velocity gradient of the weight") {
    const double delta = 0.5;
    for (double g : {0.5, 0.75, 1.0, 1.25})
        for (double x = 0.0; x <= 300.0; x += 1.13)
            for (double v = -50.0; v <= 50.0; v += 0.071) {
                const double h = 1e-5;
                const double d = (weight_c(x, (v + h) * (v + h), g, delta) - weight_c(x, (v - h) * (v - h), g, delta)) /
                                 (2.0 * h);
                const double jv = japanese(v * v);
                const double s = delta * japanese(x * x) * std::pow(jv, g - 3.0);
                CHECK(std::abs(d) <= kGradC * std::pow(jv, g - 1.0) * (1.0 + std::abs(cutoff_chi_prime(s))));
            }
}

TEST_CASE("weight regions") {
    const double g = 0.5, delta = 0.5, M = 1.0;
    // for fixed (x, v) the region only moves from + towards - as time grows
    for (double x : {10.0, 100.0, 1000.0})
        for (double v : {0.0, 2.0, 8.0}) {
            int prev = 0;
            for (double t = 0.0; t < 2000.0; t += 1.0) {
                const Region r = partition_H(t, x, v * v, g, delta, M);
                const int k = r == Region::Plus ? 0 : (r == Region::Zero ? 1 : 2);
                CHECK(k >= prev);
                prev = k;
            }
            CHECK(prev == 2);
        }
    // inner region: the weight is 3<v>^gamma
    CHECK(weight_c(0.0, 4.0, g, delta) == doctest::Approx(3.0 * std::pow(japanese(4.0), g)));
}

TEST_CASE("weight validation") {
    WeightParams w;
    w.kind = WeightKind::ExpX;
    CHECK_THROWS_AS(w.validate(1.0), ConfigError);
    CHECK_NOTHROW(w.validate(2.0));
    w.kind = WeightKind::ExpC;
    CHECK_THROWS_AS(w.validate(2.0), ConfigError);
    w.alpha_weight = 0.2;
    CHECK_THROWS_AS(w.validate(1.0), ConfigError);
    CHECK_THROWS_AS(parse_weight_kind("gauss"), ConfigError);
    CHECK(to_string(parse_weight_kind("exp_c")) == "exp_c");
}

TEST_CASE("fluid moment identities") {
    const SpaceGrid sg = build_space_grid(16.0, 64);
    // continuity is exact; the momentum closure carries the O(h^2) error of L(v sqrtM)
    for (double h : {0.2, 0.1}) {
        const OperatorSet ops = kt::ops_for(2.0, h);
        const FluidResidual r = fluid_residual_generator(ops, white_noise(ops, sg, 3));
        CHECK(r.r_a <= 1e-12);
        CHECK(r.r_b <= 0.1 * h * h);
        CHECK(alpha_fluid(ops) == doctest::Approx(1.0).epsilon(1e-10)); // second moment of the Gaussian
    }
}

}
