#include "kfp/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

namespace kfp {

namespace {

const cplx I{0.0, 1.0};

CSpMat diag_sparse(const CVec& d) {
    CSpMat D(d.size(), d.size());
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

CVec velocity_dot(const OperatorSet& ops, const Vec& eta) {
    if (eta.size() != ops.grid.dim) throw ConfigError("wavenumber dimension does not match dim_v");
    return (ops.grid.nodes * eta).cast<cplx>();
}

// Fixes the bilinear norm to one and the sign so that <sqrtM, e> has positive real part.
void normalize(const OperatorSet& ops, CVec& e) {
    const cplx b = ops.pair(e, e);
    e /= std::sqrt(b);
    const cplx c = ops.cell() * (ops.sqrtM.cast<cplx>().array() * e.array()).sum();
    if (c.real() < 0.0) e = -e;
}

CSpMat identity(int n) {
    CSpMat Id(n, n);
    Id.setIdentity();
    return Id;
}

// Solves (A) y = rhs subject to sqrtM . y = 0 with a bordered system.
class BorderedSolver {
public:
    BorderedSolver(const CSpMat& A, const Vec& s) : n_(static_cast<int>(A.rows())) {
        std::vector<Eigen::Triplet<cplx>> t;
        t.reserve(A.nonZeros() + 2 * n_);
        for (int k = 0; k < A.outerSize(); ++k)
            for (CSpMat::InnerIterator it(A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        for (int i = 0; i < n_; ++i) {
            t.emplace_back(i, n_, s(i));
            t.emplace_back(n_, i, s(i));
        }
        CSpMat B(n_ + 1, n_ + 1);
        B.setFromTriplets(t.begin(), t.end());
        lu_.compute(B);
        if (lu_.info() != Eigen::Success) throw NumericalError("bordered factorization failed");
    }
    CVec solve(const CVec& rhs) const {
        CVec r(n_ + 1);
        r.head(n_) = rhs;
        r(n_) = 0.0;
        CVec y = lu_.solve(r);
        return y.head(n_);
    }

private:
    int n_;
    Eigen::SparseLU<CSpMat> lu_;
};

} // namespace

CSpMat assemble_L_eta(const OperatorSet& ops, const Vec& eta) {
    CSpMat A = ops.L.cast<cplx>();
    if (eta.norm() == 0.0) return A;
    A -= I * diag_sparse(velocity_dot(ops, eta));
    return A;
}

CSpMat assemble_damped(const OperatorSet& ops, const Vec& eta) {
    CSpMat A = -ops.Lambda.cast<cplx>();
    if (eta.norm() == 0.0) return A;
    A -= I * diag_sparse(velocity_dot(ops, eta));
    return A;
}

ModeEigenData refine_eigenpair(const OperatorSet& ops, const CSpMat& A, const CVec& guess, cplx shift,
                               const EigenOptions& opt) {
    const int n = static_cast<int>(A.rows());
    const CSpMat Id = identity(n);
    CVec x = guess / guess.norm();
    cplx sigma = shift;
    const double scale = std::max(1.0, std::abs(shift));
    bool converged = false;
    for (int it = 0; it < opt.max_iter; ++it) {
        Eigen::SparseLU<CSpMat> lu;
        lu.compute(A - sigma * Id);
        CVec y;
        if (lu.info() == Eigen::Success) y = lu.solve(x);
        if (lu.info() != Eigen::Success || !y.allFinite()) {
            // exactly singular shift: the current vector is already an eigenvector
            converged = (A * x - sigma * x).norm() <= 1e-10 * scale;
            break;
        }
        x = y / y.norm();
        const CVec Ax = A * x;
        const cplx xx = (x.array() * x.array()).sum();
        sigma = (x.array() * Ax.array()).sum() / xx;
        const double res = (Ax - sigma * x).norm();
        if (res <= opt.tol * std::max(scale, std::abs(sigma)) * 10.0) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        const double res = (A * x - sigma * x).norm();
        if (res > 1e-9 * std::max(scale, std::abs(sigma)))
            throw NumericalError("eigenpair refinement did not converge (residual " + std::to_string(res) + ")");
    }
    ModeEigenData out;
    out.lambda = sigma;
    out.e_D = x;
    normalize(ops, out.e_D);
    return out;
}

ModeEigenData leading_eigenpair(const OperatorSet& ops, const CSpMat& A, const EigenOptions& opt) {
    const int n = static_cast<int>(A.rows());
    if (n > opt.dense_cap) {
        // shift-invert from the kernel direction; valid on the long-wave branch
        return refine_eigenpair(ops, A, ops.sqrtM.cast<cplx>(), cplx(0.0, 0.0), opt);
    }
    Eigen::ComplexEigenSolver<CMat> es(CMat(A), true);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolve failed");
    const CVec& ev = es.eigenvalues();
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
        return a < b;
    });
    const double gap = n > 1 ? ev(idx[0]).real() - ev(idx[1]).real() : 0.0;
    if (opt.longwave && gap < 1e-8) throw NumericalError("gap collapse: leading branch is not isolated");
    CVec guess = es.eigenvectors().col(idx[0]);
    ModeEigenData out;
    try {
        out = refine_eigenpair(ops, A, guess, ev(idx[0]), opt);
    } catch (const NumericalError&) {
        out.lambda = ev(idx[0]);
        out.e_D = guess;
        normalize(ops, out.e_D);
    }
    out.gap = gap;
    return out;
}

ModeEigenData leading_eigenpair(const OperatorSet& ops, const Vec& eta, const EigenOptions& opt) {
    ModeEigenData out = leading_eigenpair(ops, assemble_L_eta(ops, eta), opt);
    out.eta = eta;
    return out;
}

std::vector<ModeEigenData> eigen_branch(const OperatorSet& ops, const std::vector<double>& etas,
                                        const EigenOptions& opt) {
    std::vector<ModeEigenData> out;
    out.reserve(etas.size());
    CVec prev = ops.sqrtM.cast<cplx>();
    cplx prev_lambda = 0.0;
    double prev_eta = 0.0;
    cplx slope = 0.0;
    for (double e : etas) {
        if (e < prev_eta) throw ConfigError("eigen_branch: wavenumbers must be ascending");
        Vec eta = Vec::Zero(ops.grid.dim);
        eta(0) = e;
        const CSpMat A = assemble_L_eta(ops, eta);
        ModeEigenData d;
        if (e == 0.0) {
            d.lambda = 0.0;
            d.e_D = ops.sqrtM.cast<cplx>();
            normalize(ops, d.e_D);
        } else {
            // quadratic extrapolation of lambda in |eta|
            const cplx guess = prev_lambda + slope * (e * e - prev_eta * prev_eta);
            d = refine_eigenpair(ops, A, prev, guess, opt);
        }
        d.eta = eta;
        if (e > 0.0 && prev_eta > 0.0) slope = (d.lambda - prev_lambda) / (e * e - prev_eta * prev_eta);
        else if (e > 0.0) slope = d.lambda / (e * e);
        prev = d.e_D;
        prev_lambda = d.lambda;
        prev_eta = e;
        out.push_back(std::move(d));
    }
    return out;
}

DiffusionData diffusion_coefficient(const OperatorSet& ops, const Vec& omega) {
    if (std::abs(omega.norm() - 1.0) > 1e-12) throw ConfigError("diffusion_coefficient: omega must be a unit vector");
    const Vec vw = ops.grid.nodes * omega;
    const Vec rhs = ops.P1(Vec(vw.array() * ops.sqrtM.array()));
    BorderedSolver solver(ops.L.cast<cplx>(), ops.sqrtM);
    const CVec x = solver.solve(rhs.cast<cplx>());
    DiffusionData dd;
    dd.E_D1 = x.real();
    dd.a_gamma = -ops.inner(Vec(vw.array() * ops.sqrtM.array()), dd.E_D1);

    // independent estimate: least squares of lambda = -a eta^2 + c2 eta^4 + c3 eta^6 along omega
    const int m = 10;
    std::vector<double> etas;
    for (int k = 0; k < m; ++k) etas.push_back(1e-3 * std::pow(50.0, double(k) / (m - 1)));
    dd.fit_window = etas;
    Eigen::MatrixXd X(m, 3);
    Vec y(m);
    CVec prev = ops.sqrtM.cast<cplx>();
    cplx lam = 0.0;
    for (int k = 0; k < m; ++k) {
        const Vec eta = etas[k] * omega;
        const ModeEigenData d = refine_eigenpair(ops, assemble_L_eta(ops, eta), prev, lam);
        prev = d.e_D;
        lam = d.lambda;
        X(k, 0) = -etas[k] * etas[k];
        X(k, 1) = std::pow(etas[k], 4);
        X(k, 2) = std::pow(etas[k], 6);
        y(k) = d.lambda.real();
    }
    // rescale rows so each sample carries equal relative weight
    for (int k = 0; k < m; ++k) {
        const double w = 1.0 / (etas[k] * etas[k]);
        X.row(k) *= w;
        y(k) *= w;
    }
    const Vec c = X.colPivHouseholderQr().solve(y);
    dd.a_fit = c(0);
    double worst = 0.0;
    for (int k = 0; k < m; ++k) {
        const double model = X.row(k).dot(c);
        worst = std::max(worst, std::abs(model - y(k)) / std::abs(y(k)));
    }
    dd.fit_residual = worst;
    dd.agreement = std::abs(dd.a_fit - dd.a_gamma) / dd.a_gamma;
    return dd;
}

double expansion_check(const OperatorSet& ops, const Vec& eta, const DiffusionData& dd) {
    const double r = eta.norm();
    if (r == 0.0) return 0.0;
    const ModeEigenData d = refine_eigenpair(ops, assemble_L_eta(ops, eta), ops.sqrtM.cast<cplx>(), 0.0);
    const CVec approx = ops.sqrtM.cast<cplx>() + I * r * dd.E_D1.cast<cplx>();
    return ops.norm(CVec(d.e_D - approx)) / (r * r);
}

double expansion_check(const OperatorSet& ops, const Vec& eta) {
    const double r = eta.norm();
    if (r == 0.0) return 0.0;
    return expansion_check(ops, eta, diffusion_coefficient(ops, eta / r));
}

GapScan gap_scan(const OperatorSet& ops, const std::vector<Vec>& eta_list, double delta) {
    const int n = ops.size();
    if (n > 400) throw ConfigError("gap_scan: velocity grid exceeds the dense resolution cap of 400 nodes");
    GapScan out;
    out.delta = delta;
    out.no_theory = ops.params.gamma < 1.0;
    std::vector<std::pair<double, CVec>> spectra;
    for (const Vec& eta : eta_list) {
        Eigen::ComplexEigenSolver<CMat> es(CMat(assemble_L_eta(ops, eta)), false);
        if (es.info() != Eigen::Success) throw NumericalError("gap_scan: dense eigensolve failed");
        spectra.emplace_back(eta.norm(), es.eigenvalues());
    }
    double top_far = -1e300;
    bool any_far = false;
    for (auto& [r, ev] : spectra) {
        if (r >= delta) {
            top_far = std::max(top_far, ev.real().maxCoeff());
            any_far = true;
        }
    }
    out.tau = any_far ? -top_far : 0.0;
    for (auto& [r, ev] : spectra) {
        std::vector<double> re(ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i) re[i] = ev(i).real();
        std::sort(re.begin(), re.end(), std::greater<>());
        GapRow row;
        row.eta_abs = r;
        row.top_re = re[0];
        row.second_re = re.size() > 1 ? re[1] : re[0];
        if (r < delta && any_far) {
            row.count_above = 0;
            for (double x : re)
                if (x > -out.tau) ++row.count_above;
        }
        out.rows.push_back(row);
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const GapRow& a, const GapRow& b) { return a.eta_abs < b.eta_abs; });
    return out;
}

double default_delta(const OperatorSet& ops, double eta_max, int samples) {
    if (ops.size() > 400) throw ConfigError("default_delta: velocity grid exceeds the dense resolution cap");
    double gap0 = 0.0;
    for (int k = 0; k <= samples; ++k) {
        const double r = eta_max * k / samples;
        Vec eta = Vec::Zero(ops.grid.dim);
        eta(0) = r;
        Eigen::ComplexEigenSolver<CMat> es(CMat(assemble_L_eta(ops, eta)), false);
        std::vector<double> re(es.eigenvalues().size());
        for (size_t i = 0; i < re.size(); ++i) re[i] = es.eigenvalues()(i).real();
        std::sort(re.begin(), re.end(), std::greater<>());
        const double gap = re[0] - re[1];
        if (k == 0) gap0 = gap;
        else if (gap < 0.1 * gap0) return 0.5 * r;
    }
    return 0.5 * eta_max;
}

cplx fluid_reduction_solve(const OperatorSet& ops, double eta_abs, int max_iter) {
    if (eta_abs == 0.0) return 0.0;
    const Vec v1 = ops.velocity(0);
    const CVec w = ops.P1(Vec(v1.array() * ops.sqrtM.array())).cast<cplx>();
    Vec eta = Vec::Zero(ops.grid.dim);
    eta(0) = eta_abs;
    const CSpMat A = assemble_L_eta(ops, eta);
    const CSpMat Id = identity(ops.size());
    cplx lambda = 0.0; // zeta = 0
    for (int it = 0; it < max_iter; ++it) {
        BorderedSolver solver(A - lambda * Id, ops.sqrtM);
        const CVec y = solver.solve(w);
        const cplx next = eta_abs * eta_abs * ops.pair(w, y);
        if (std::abs(next - lambda) <= 1e-14 * std::max(1e-300, std::abs(next))) {
            return next;
        }
        lambda = next;
    }
    throw NumericalError("fluid reduction fixed point did not converge");
}

CVec apply_projector(const OperatorSet& ops, const ModeEigenData& ed, const CVec& f) {
    return ops.pair(ed.e_D, f) * ed.e_D;
}

} // namespace kfp
