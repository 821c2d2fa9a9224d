#include "kfp/tridiag.hpp"

#include <cstdlib>

#include <Eigen/Eigenvalues>

namespace kfp {

bool Tridiagonal::is_tridiagonal(const CSpMat& M) {
    for (int k = 0; k < M.outerSize(); ++k)
        for (CSpMat::InnerIterator it(M, k); it; ++it)
            if (std::abs(it.row() - it.col()) > 1) return false;
    return true;
}

Tridiagonal Tridiagonal::from_sparse(const CSpMat& M) {
    if (!is_tridiagonal(M)) throw NumericalError("matrix is not tridiagonal");
    const Eigen::Index n = M.rows();
    Tridiagonal t;
    t.lo = CVec::Zero(n);
    t.d = CVec::Zero(n);
    t.up = CVec::Zero(n);
    for (int k = 0; k < M.outerSize(); ++k)
        for (CSpMat::InnerIterator it(M, k); it; ++it) {
            if (it.row() == it.col()) t.d(it.row()) += it.value();
            else if (it.row() == it.col() + 1) t.lo(it.row()) += it.value();
            else t.up(it.row()) += it.value();
        }
    return t;
}

Tridiagonal Tridiagonal::adjoint() const {
    const Eigen::Index n = d.size();
    Tridiagonal t;
    t.d = d.conjugate();
    t.lo = CVec::Zero(n);
    t.up = CVec::Zero(n);
    for (Eigen::Index i = 1; i < n; ++i) {
        t.lo(i) = std::conj(up(i - 1));
        t.up(i - 1) = std::conj(lo(i));
    }
    return t;
}

void Tridiagonal::factor() {
    for (Eigen::Index i = 1; i < d.size(); ++i) {
        const cplx w = lo(i) / d(i - 1);
        lo(i) = w;
        d(i) -= w * up(i - 1);
    }
}

void Tridiagonal::solve(CVec& b) const {
    const Eigen::Index n = b.size();
    for (Eigen::Index i = 1; i < n; ++i) b(i) -= lo(i) * b(i - 1);
    b(n - 1) /= d(n - 1);
    for (Eigen::Index i = n - 2; i >= 0; --i) b(i) = (b(i) - up(i) * b(i + 1)) / d(i);
}

CVec Tridiagonal::apply(const CVec& x) const {
    const Eigen::Index n = x.size();
    CVec y = d.array() * x.array();
    for (Eigen::Index i = 1; i < n; ++i) {
        y(i) += lo(i) * x(i - 1);
        y(i - 1) += up(i - 1) * x(i);
    }
    return y;
}

const RationalPF& radau_partial_fractions() {
    static const RationalPF rc = [] {
        // Q(z) = 1 - 3/5 z + 3/20 z^2 - 1/60 z^3, monic: z^3 - 9 z^2 + 36 z - 60
        // P(z) = 1 + 2/5 z + 1/20 z^2
        Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
        comp(0, 2) = 60.0;
        comp(1, 0) = 1.0;
        comp(1, 2) = -36.0;
        comp(2, 1) = 1.0;
        comp(2, 2) = 9.0;
        Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);
        RationalPF out;
        for (int j = 0; j < 3; ++j) {
            cplx p = es.eigenvalues()(j);
            for (int it = 0; it < 3; ++it) {
                const cplx q = ((p - 9.0) * p + 36.0) * p - 60.0;
                const cplx dq = (3.0 * p - 18.0) * p + 36.0;
                p -= q / dq;
            }
            const cplx P = 1.0 + 0.4 * p + 0.05 * p * p;
            const cplx dQ = -0.6 + 0.3 * p - 0.05 * p * p;
            out.poles[j] = p;
            out.residues[j] = P / dQ;
        }
        return out;
    }();
    return rc;
}

} // namespace kfp
