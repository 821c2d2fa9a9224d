#pragma once

#include <vector>

#include "kfp/functionals.hpp"
#include "kfp/velocity_ops.hpp"

namespace kfp {

// Velocity operators restricted to |v| <= half_width (no Maxwellian tail
// condition: small-time smoothing is local in v).
struct WindowOperator {
    PotentialParams params;
    VelocityGrid grid;
    SpMat L;
    Vec K;
    SpMat Dv;
};

WindowOperator build_window(const PotentialParams& p, double half_width, int n_per_axis);

enum class ProbeTarget { GradV, GradX };

struct ProbeOptions {
    int steps = 48;          // Radau steps per propagation
    int power_iter = 80;
    double tol = 1e-8;       // relative change of sigma^2
    double eta_min = 0.5;
    double eta_max = 2e6;
    int coarse = 24;         // log-spaced scan before golden refinement
    int refine = 14;
    int threads = 1;
    std::vector<double> eta_hint; // per t: scan [hint/4, 4 hint] instead of the full range
};

struct NormSample {
    double t = 0.0;
    double value = 0.0; // sup over eta of the operator norm
    double eta = 0.0;   // maximizing wavenumber
};

// sup_eta |T e^{t A_eta}|, A_eta = -i v eta - Lambda, in the frame of the weight
// (exp_x: exponential frame e^{x/2D}; exp_c: inner-region velocity weight).
std::vector<NormSample> semigroup_norms(const WindowOperator& w, const WeightParams& wp, ProbeTarget target,
                                        const std::vector<double>& t_list, const ProbeOptions& opt = {});

// sup_eta |eta| |h^(j)(t)| over unit initial data, h^(j) the damped Picard waves.
std::vector<NormSample> wave_norms(const WindowOperator& w, int j, const std::vector<double>& t_list,
                                   const ProbeOptions& opt = {});

// Largest singular value of left * e^{tA} (left may be empty for the identity),
// by power iteration with Radau stepping. `start` is updated with the singular vector.
double sigma_max_propagator(const CSpMat& A, const CSpMat& left, double t, int steps, int max_iter, double tol,
                            CVec& start);

} // namespace kfp
