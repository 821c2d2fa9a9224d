#pragma once

#include <map>
#include <vector>

#include "kfp/evolution.hpp"
#include "kfp/spectral.hpp"

namespace kfp {

struct SpectralSplit {
    Field f_L, f_S, f_L0, f_Lperp;
    double delta = 0.0;
};

// Mode-index keyed eigendata for the long-wave modes 0 < |eta| < delta (and eta = 0).
using EigenMap = std::map<long, ModeEigenData>;

// Modes with |eta| < delta go to the first set, the rest to the second.
std::pair<ModeSet, ModeSet> longwave_split(const ModeSet& m, double delta);

EigenMap longwave_eigendata(const OperatorSet& ops, const SpaceGrid& sg, double delta, int threads = 1);

// Fluid component B(e_D, fhat) e_D per long-wave mode and its complement.
std::pair<ModeSet, ModeSet> fluid_split(const OperatorSet& ops, const ModeSet& m_long, const EigenMap& eig);

SpectralSplit spectral_split(const OperatorSet& ops, const ModeSet& m, double delta, const EigenMap& eig);

struct WaveParts {
    double time = 0.0;
    std::vector<ModeSet> h; // h^(0) .. h^(3)
    ModeSet W3;
    ModeSet R3;             // f - W3
    ModeSet R3_solved;      // from the remainder equation
    double consistency_residual = 0.0; // |R3 - R3_solved| / |f|
    double split_residual = 0.0;       // |f - W3 - R3| / |f|
};

// Augmented per-mode system: h0' = A h0, hj' = A hj + K h(j-1), R' = (A + K) R + K h3,
// with A the damped generator. Any linear one-step scheme keeps the sum of the
// blocks equal to the same scheme applied to f.
std::vector<WaveParts> picard_waves(const OperatorSet& ops, const ModeSet& f0, const std::vector<double>& t_grid,
                                    const Scheme& scheme, int threads = 1);

// L^2 norm of a mode set via Parseval; k-th x-derivative when k > 0.
double mode_norm(const ModeSet& m, const OperatorSet& ops, int k = 0);

struct GrowthRow {
    double t = 0.0;
    int j = 0;
    double value = 0.0;
};

std::vector<GrowthRow> derivative_growth_table(const OperatorSet& ops, const std::vector<WaveParts>& parts, int k);

} // namespace kfp
