#pragma once

#include <vector>

#include "kfp/velocity_ops.hpp"

namespace kfp {

struct ModeEigenData {
    Vec eta;
    cplx lambda{0.0, 0.0};
    CVec e_D;
    double gap = -1.0; // Re lambda minus the next real part; negative when not computed
    double expansion_residual = 0.0;
};

struct DiffusionData {
    double a_gamma = 0.0;
    Vec E_D1;
    std::vector<double> fit_window;
    double a_fit = 0.0;        // eta^2 coefficient of a polynomial fit of lambda in eta^2
    double fit_residual = 0.0; // max relative deviation of the quadratic model
    double agreement = 0.0;    // |a_fit - a_gamma| / a_gamma
};

CSpMat assemble_L_eta(const OperatorSet& ops, const Vec& eta);
// -i v.eta - Lambda: generator of the damped semigroup.
CSpMat assemble_damped(const OperatorSet& ops, const Vec& eta);

struct EigenOptions {
    bool longwave = true;      // |eta| < delta: enforce the gap-collapse check
    int dense_cap = 400;       // grids above this size use shift-invert only
    double tol = 1e-13;
    int max_iter = 60;
};

ModeEigenData leading_eigenpair(const OperatorSet& ops, const CSpMat& L_eta, const EigenOptions& opt = {});
ModeEigenData leading_eigenpair(const OperatorSet& ops, const Vec& eta, const EigenOptions& opt = {});

// Rayleigh-quotient iteration from a guess (bilinear quotient; L_eta is complex symmetric).
ModeEigenData refine_eigenpair(const OperatorSet& ops, const CSpMat& L_eta, const CVec& guess, cplx shift,
                               const EigenOptions& opt = {});

// Leading branch at |eta| = etas[k] along the first axis, by continuation from eta = 0.
// etas must be nonnegative and ascending.
std::vector<ModeEigenData> eigen_branch(const OperatorSet& ops, const std::vector<double>& etas,
                                        const EigenOptions& opt = {});

DiffusionData diffusion_coefficient(const OperatorSet& ops, const Vec& omega);

double expansion_check(const OperatorSet& ops, const Vec& eta);
double expansion_check(const OperatorSet& ops, const Vec& eta, const DiffusionData& dd);

struct GapRow {
    double eta_abs = 0.0;
    double top_re = 0.0;
    double second_re = 0.0;
    int count_above = -1; // eigenvalues with Re > -tau (long-wave rows only)
};

struct GapScan {
    double tau = 0.0;
    double delta = 0.0;
    bool no_theory = false; // gamma < 1
    std::vector<GapRow> rows;
};

GapScan gap_scan(const OperatorSet& ops, const std::vector<Vec>& eta_list, double delta);

// Half the |eta| where the gap between the two leading real parts drops below
// 10% of its value at eta = 0; eta_max/2 if it never does.
double default_delta(const OperatorSet& ops, double eta_max = 5.0, int samples = 50);

cplx fluid_reduction_solve(const OperatorSet& ops, double eta_abs, int max_iter = 200);

// Rank-one spectral projector pi f = B(e_D, f) e_D, where B is the bilinear pairing.
// Equivalently <e_D(-eta), f> e_D(eta) with the Hermitian pairing.
CVec apply_projector(const OperatorSet& ops, const ModeEigenData& ed, const CVec& f);

} // namespace kfp
