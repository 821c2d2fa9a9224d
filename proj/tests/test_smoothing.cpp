#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "kfp/smoothing.hpp"

using namespace kfp;

TEST_SUITE("smoothing") {

TEST_CASE("propagator norm by power iteration matches a dense SVD") {
    PotentialParams p;
    p.gamma = 1.0;
    const WindowOperator w = build_window(p, 1.5, 61);
    const int n = w.grid.size();
    for (double eta : {0.0, 3.0, 40.0}) {
        CMat A = CMat(Mat(w.L).cast<cplx>());
        for (int i = 0; i < n; ++i) A(i, i) += cplx(-w.K(i), -eta * w.grid.nodes(i, 0));
        CSpMat As = A.sparseView();
        for (double t : {0.01, 0.1}) {
            const CMat E = (t * A).exp();
            const double ref = Eigen::JacobiSVD<CMat>(E).singularValues()(0);
            std::mt19937_64 rng(1);
            std::normal_distribution<double> nd;
            CVec start(n), st2(n);
            for (int i = 0; i < n; ++i) {
                start(i) = cplx(nd(rng), nd(rng));
                st2(i) = cplx(nd(rng), nd(rng));
            }
            const double s = sigma_max_propagator(As, CSpMat(), t, 48, 200, 1e-12, start);
            CHECK(s == doctest::Approx(ref).epsilon(1e-6));
            // with a left factor: the velocity derivative
            const CSpMat D = Mat(w.Dv).cast<cplx>().sparseView();
            const double ref_d = Eigen::JacobiSVD<CMat>(CMat(D) * E).singularValues()(0);
            CHECK(sigma_max_propagator(As, D, t, 48, 400, 1e-12, st2) == doctest::Approx(ref_d).epsilon(1e-4));
        }
    }
}

TEST_CASE("velocity smoothing rate on a short window") {
    PotentialParams p;
    p.gamma = 2.0;
    const WindowOperator w = build_window(p, 1.5, 301);
    ProbeOptions o;
    o.power_iter = 30;
    o.tol = 1e-6;
    o.coarse = 12;
    o.refine = 8;
    const std::vector<double> ts = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    const auto r = semigroup_norms(w, WeightParams{}, ProbeTarget::GradV, ts, o);
    REQUIRE(r.size() == ts.size());
    const double slope = std::log(r.back().value / r.front().value) / std::log(ts.back() / ts.front());
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}

}
