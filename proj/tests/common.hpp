#pragma once

#include <random>

#include "kfp/velocity_ops.hpp"

namespace kt {

inline kfp::OperatorSet ops_for(double gamma, double h, int dim = 1) {
    kfp::PotentialParams p;
    p.gamma = gamma;
    p.dim_v = dim;
    return kfp::build_operator_set(kfp::grid_for(gamma, h, dim), p);
}

inline kfp::Vec random_vec(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    kfp::Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

inline kfp::CVec random_cvec(int n, std::mt19937_64& rng) {
    return random_vec(n, rng).cast<kfp::cplx>() + kfp::cplx(0.0, 1.0) * random_vec(n, rng).cast<kfp::cplx>();
}

} // namespace kt
