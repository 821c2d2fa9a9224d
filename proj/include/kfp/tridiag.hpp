#pragma once

#include "kfp/types.hpp"

namespace kfp {

// LU factors of a complex tridiagonal matrix (no pivoting; the shifted
// operators used here are diagonally dominant or close to it).
struct Tridiagonal {
    CVec lo, d, up; // lo(i) = M(i, i-1), up(i) = M(i, i+1)

    // throws if M has entries off the three central diagonals
    static Tridiagonal from_sparse(const CSpMat& M);
    static bool is_tridiagonal(const CSpMat& M);

    Tridiagonal adjoint() const;
    void factor();
    void solve(CVec& b) const; // requires factor()
    // b -> M b on the unfactored matrix
    CVec apply(const CVec& x) const;
};

// Partial fractions of the (2,3) Pade approximant of e^z (the stability function
// of three-stage Radau IIA): R(z) = sum_j r_j / (z - p_j).
struct RationalPF {
    cplx poles[3];
    cplx residues[3];
};
const RationalPF& radau_partial_fractions();

} // namespace kfp
