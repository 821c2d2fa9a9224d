#pragma once

#include <vector>

#include "kfp/types.hpp"

namespace kfp {

struct PotentialParams {
    double gamma = 2.0;
    double phi0 = 0.0;
    double cutoff_radius = 4.0;
    double cutoff_strength = 10.0;
    double longwave_delta = 0.0; // 0 selects the automatic rule in spectral
    int dim_v = 1;

    void validate() const;
};

struct VelocityGrid {
    double v_max = 0.0;
    int n_per_axis = 0;
    int dim = 1;
    double spacing = 0.0;
    Mat nodes;                // size() x dim
    Vec quadrature_weights;   // h^dim at every node

    int size() const { return static_cast<int>(nodes.rows()); }
    double cell() const { return quadrature_weights.size() ? quadrature_weights(0) : 0.0; }
    double axis(int k) const { return -v_max + k * spacing; }
};

VelocityGrid build_grid(double v_max, int n_per_axis, int dim);

// Smallest half-width (rounded up to a multiple of `spacing`) for which
// exp(-Phi(v_max e1)/2) < tol.
double suggest_v_max(double gamma, int dim, double spacing, double tol = 1e-10);
VelocityGrid grid_for(double gamma, double spacing, int dim, double tol = 1e-10);

double japanese(double r2);
double cutoff_chi(double s);
double cutoff_chi_prime(double s);

// Phi without the normalizing constant: <v>^gamma / gamma.
double phi_shape(double r2, double gamma);
// Continuum potential 1/4|grad Phi|^2 - 1/2 Delta Phi in dimension d.
double schrodinger_potential(double r2, double gamma, int dim);

struct Maxwellian {
    Vec sqrtM;
    double phi0 = 0.0;
    double boundary_sqrtM = 0.0; // exp(-Phi(v_max e1)/2)
};

Maxwellian maxwellian(const VelocityGrid& grid, const PotentialParams& params);

// Structure-preserving discretization: off-diagonal 1/h^2 couplings and the
// diagonal chosen so that L sqrtM = 0 holds exactly.
SpMat assemble_L(const VelocityGrid& grid, const PotentialParams& params);
// Dirichlet Laplacian minus the continuum potential sampled at the nodes.
SpMat assemble_L_literal(const VelocityGrid& grid, const PotentialParams& params);

struct LambdaK {
    SpMat Lambda;
    Vec K; // diagonal entries
};

LambdaK split_lambda_K(const SpMat& L, const VelocityGrid& grid, const PotentialParams& params);

struct Projections {
    Mat P0;
    Mat P1;
};

Projections projections(const Vec& sqrtM, double cell);

struct OperatorSet {
    VelocityGrid grid;
    PotentialParams params; // phi0 filled in
    Vec sqrtM;
    SpMat L;
    SpMat Lambda;
    Vec K;
    std::vector<SpMat> Dv;
    Vec jv; // <v> at the nodes
    double boundary_sqrtM = 0.0;

    int size() const { return grid.size(); }
    double cell() const { return grid.cell(); }
    Vec weight_pow(double s) const;
    Vec velocity(int axis) const { return grid.nodes.col(axis); }

    double inner(const Vec& f, const Vec& g) const { return cell() * f.dot(g); }
    double norm(const Vec& f) const;
    double norm(const CVec& f) const;
    cplx pair(const CVec& f, const CVec& g) const; // bilinear, no conjugation

    Vec P0(const Vec& f) const;
    Vec P1(const Vec& f) const;
    CVec P0(const CVec& f) const;
    CVec P1(const CVec& f) const;
};

OperatorSet build_operator_set(const VelocityGrid& grid, const PotentialParams& params);

double sigma_norm(const OperatorSet& ops, const Vec& f);
double sigma_norm(const OperatorSet& ops, const CVec& f);

// min over the P1 range of <-Lf,f> / |f|_sigma^2.
double coercivity_constant(const OperatorSet& ops);

// Largest eigenvalue of the symmetric part of L (in the quadrature inner product).
double max_rayleigh(const SpMat& L);
double symmetry_defect(const SpMat& L);

} // namespace kfp
