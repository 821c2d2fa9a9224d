#include "kfp/smoothing.hpp"

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Eigenvalues>

#include "kfp/evolution.hpp"
#include "kfp/parallel.hpp"
#include "kfp/tridiag.hpp"

namespace kfp {

WindowOperator build_window(const PotentialParams& p, double half_width, int n_per_axis) {
    if (p.dim_v != 1) throw ConfigError("smoothing probes run with dim_v = 1");
    WindowOperator w;
    w.params = p;
    w.grid = build_grid(half_width, n_per_axis, 1);
    w.L = assemble_L(w.grid, p);
    const int n = w.grid.size();
    // Dirichlet closure at the window edges: couple to a ghost node carrying zero
    const double h = w.grid.spacing;
    for (int i : {0, n - 1}) {
        const double v = w.grid.nodes(i, 0);
        const double ghost = v + (i == 0 ? -h : h);
        const double dphi = phi_shape(ghost * ghost, p.gamma) - phi_shape(v * v, p.gamma);
        w.L.coeffRef(i, i) -= std::exp(-0.5 * dphi) / (h * h);
    }
    w.K = split_lambda_K(w.L, w.grid, p).K;
    const double ih = 0.5 / w.grid.spacing;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
        if (i > 0) trip.emplace_back(i, i - 1, -ih);
        if (i + 1 < n) trip.emplace_back(i, i + 1, ih);
    }
    w.Dv.resize(n, n);
    w.Dv.setFromTriplets(trip.begin(), trip.end());
    return w;
}

namespace {

using Apply = std::function<CVec(const CVec&)>;

// Largest eigenvalue of T*T by Lanczos with full reorthogonalization; returns
// its square root and leaves the Ritz vector in x.
double lanczos_sigma(const Apply& T, const Apply& Tadj, int max_iter, double tol, CVec& x) {
    const Eigen::Index n = x.size();
    const int kmax = static_cast<int>(std::min<Eigen::Index>(max_iter, n));
    CMat Q(n, kmax + 1);
    std::vector<double> alpha, beta;
    Q.col(0) = x / x.norm();
    double theta = 0.0, prev = -1.0;
    Vec ritz;
    int k = 0;
    for (; k < kmax; ++k) {
        CVec w = Tadj(T(Q.col(k)));
        const double a = Q.col(k).dot(w).real();
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= k; ++i) w -= Q.col(i).dot(w) * Q.col(i);
        const double b = w.norm();
        Eigen::MatrixXd Tk = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (int i = 0; i <= k; ++i) {
            Tk(i, i) = alpha[i];
            if (i < k) Tk(i, i + 1) = Tk(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tk);
        theta = es.eigenvalues()(k);
        ritz = es.eigenvectors().col(k);
        if (b <= 1e-14 * std::max(std::abs(a), 1e-300) || (prev > 0.0 && std::abs(theta - prev) <= tol * theta)) {
            ++k;
            break;
        }
        prev = theta;
        beta.push_back(b);
        Q.col(k + 1) = w / b;
    }
    x = Q.leftCols(ritz.size()) * ritz.cast<cplx>();
    return std::sqrt(std::max(theta, 0.0));
}

// e^{tB} for B = [[A], [K, A], ...] (block lower bidiagonal, m blocks) by Radau steps.
class BlockRadau {
public:
    BlockRadau(const Tridiagonal& A, const Vec& K, int m, double dt) : n_(A.d.size()), m_(m), dt_(dt), K_(K) {
        const auto& pf = radau_partial_fractions();
        for (int j = 0; j < 3; ++j) {
            Tridiagonal s = A;
            s.lo *= dt;
            s.up *= dt;
            s.d = dt * s.d.array() - pf.poles[j];
            bw_[j] = s.adjoint();
            fw_[j] = s;
            fw_[j].factor();
            bw_[j].factor();
        }
    }

    CVec propagate(CVec y, int steps, bool adjoint) const {
        for (int s = 0; s < steps; ++s) y = step(y, adjoint);
        return y;
    }

private:
    CVec step(const CVec& y, bool adjoint) const {
        const auto& pf = radau_partial_fractions();
        CVec out = CVec::Zero(y.size());
        for (int j = 0; j < 3; ++j) {
            CVec z = y;
            if (!adjoint) {
                for (int b = 0; b < m_; ++b) {
                    auto zb = z.segment(b * n_, n_);
                    if (b > 0) zb.array() -= dt_ * K_.array() * z.segment((b - 1) * n_, n_).array();
                    CVec tmp = zb;
                    fw_[j].solve(tmp);
                    zb = tmp;
                }
                out += pf.residues[j] * z;
            } else {
                for (int b = m_ - 1; b >= 0; --b) {
                    auto zb = z.segment(b * n_, n_);
                    if (b < m_ - 1) zb.array() -= dt_ * K_.array() * z.segment((b + 1) * n_, n_).array();
                    CVec tmp = zb;
                    bw_[j].solve(tmp);
                    zb = tmp;
                }
                out += std::conj(pf.residues[j]) * z;
            }
        }
        return out;
    }

    Eigen::Index n_;
    int m_;
    double dt_;
    Vec K_;
    Tridiagonal fw_[3], bw_[3];
};

CVec random_start(int n) {
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> N(0.0, 1.0);
    CVec x(n);
    for (int i = 0; i < n; ++i) x(i) = cplx(N(rng), N(rng));
    return x;
}

// Frame of the weight: conjugation of L and Dv by the velocity weight, plus the
// exponential shift for exp_x.
struct Frame {
    SpMat L, Dv;
    double kappa = 0.0; // exp_x: multiplier i eta - kappa, generator shift kappa v
};

Frame make_frame(const WindowOperator& w, const WeightParams& wp) {
    wp.validate(w.params.gamma);
    Frame f;
    f.L = w.L;
    f.Dv = w.Dv;
    if (wp.kind == WeightKind::ExpX) f.kappa = 1.0 / (2.0 * wp.D);
    if (wp.kind == WeightKind::ExpC) {
        const int n = w.grid.size();
        Vec W(n);
        for (int i = 0; i < n; ++i)
            W(i) = std::sqrt(weight_mu(wp, w.params.gamma, 0.0, w.grid.nodes(i, 0) * w.grid.nodes(i, 0)));
        auto conj = [&](SpMat& M) {
            for (int k = 0; k < M.outerSize(); ++k)
                for (SpMat::InnerIterator it(M, k); it; ++it) it.valueRef() *= W(it.row()) / W(it.col());
        };
        conj(f.L);
        conj(f.Dv);
    }
    return f;
}

CSpMat generator(const WindowOperator& w, const Frame& f, double eta) {
    const int n = w.grid.size();
    CSpMat A = f.L.cast<cplx>();
    for (int i = 0; i < n; ++i) {
        const double v = w.grid.nodes(i, 0);
        A.coeffRef(i, i) += cplx(f.kappa * v - w.K(i), -eta * v);
    }
    A.makeCompressed();
    return A;
}

// Maximize g over eta: coarse log scan, then golden section around the best point.
NormSample maximize_eta(const std::function<double(double)>& g, const ProbeOptions& opt, bool include_zero,
                        double hint = 0.0) {
    NormSample best;
    const double la = std::log(hint > 0.0 ? hint / 4.0 : opt.eta_min);
    const double lb = std::log(hint > 0.0 ? hint * 4.0 : opt.eta_max);
    const int nc = hint > 0.0 ? 5 : opt.coarse;
    std::vector<double> le(nc), val(nc);
    int arg = 0;
    for (int k = 0; k < nc; ++k) {
        le[k] = la + (lb - la) * k / (nc - 1);
        val[k] = g(std::exp(le[k]));
        if (val[k] > val[arg]) arg = k;
    }
    best.eta = std::exp(le[arg]);
    best.value = val[arg];
    if (include_zero) {
        const double g0 = g(0.0);
        if (g0 >= best.value) {
            best.eta = 0.0;
            best.value = g0;
        }
    }
    if (best.eta == 0.0 && arg == 0) return best;
    double a = le[std::max(arg - 1, 0)], b = le[std::min(arg + 1, nc - 1)];
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double gc = g(std::exp(c)), gd = g(std::exp(d));
    for (int it = 0; it < opt.refine; ++it) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(std::exp(c));
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(std::exp(d));
        }
    }
    if (gc > best.value) {
        best.value = gc;
        best.eta = std::exp(c);
    }
    if (gd > best.value) {
        best.value = gd;
        best.eta = std::exp(d);
    }
    return best;
}

} // namespace

double sigma_max_propagator(const CSpMat& A, const CSpMat& left, double t, int steps, int max_iter, double tol,
                            CVec& start) {
    const BlockRadau prop(Tridiagonal::from_sparse(A), Vec::Zero(A.rows()), 1, t / steps);
    const bool has_left = left.size() > 0;
    const CSpMat left_adj = has_left ? CSpMat(left.adjoint()) : CSpMat();
    Apply T = [&](const CVec& x) {
        CVec y = prop.propagate(x, steps, false);
        return has_left ? CVec(left * y) : y;
    };
    Apply Tadj = [&](const CVec& y) {
        return prop.propagate(has_left ? CVec(left_adj * y) : y, steps, true);
    };
    if (start.size() != A.rows()) start = random_start(static_cast<int>(A.rows()));
    return lanczos_sigma(T, Tadj, max_iter, tol, start);
}

std::vector<NormSample> semigroup_norms(const WindowOperator& w, const WeightParams& wp, ProbeTarget target,
                                        const std::vector<double>& t_list, const ProbeOptions& opt) {
    const Frame f = make_frame(w, wp);
    const CSpMat Dc = f.Dv.cast<cplx>();
    std::vector<NormSample> out(t_list.size());
    parallel_for(static_cast<int>(t_list.size()), opt.threads, [&](int k) {
        const double t = t_list[k];
        CVec start;
        auto g = [&](double eta) {
            const CSpMat A = generator(w, f, eta);
            if (target == ProbeTarget::GradV)
                return sigma_max_propagator(A, Dc, t, opt.steps, opt.power_iter, opt.tol, start);
            const double m = std::hypot(eta, f.kappa);
            return m * sigma_max_propagator(A, CSpMat(), t, opt.steps, opt.power_iter, opt.tol, start);
        };
        out[k] = maximize_eta(g, opt, target == ProbeTarget::GradV);
        out[k].t = t;
    });
    return out;
}

std::vector<NormSample> wave_norms(const WindowOperator& w, int j, const std::vector<double>& t_list,
                                   const ProbeOptions& opt) {
    if (j < 0 || j > 3) throw ConfigError("wave level must be 0..3");
    const Eigen::Index n = w.grid.size();
    const int m = j + 1;
    const Frame f = make_frame(w, WeightParams{});
    std::vector<NormSample> out(t_list.size());
    parallel_for(static_cast<int>(t_list.size()), opt.threads, [&](int k) {
        const double t = t_list[k];
        CVec start;
        auto g = [&](double eta) {
            const BlockRadau prop(Tridiagonal::from_sparse(generator(w, f, eta)), w.K, m, t / opt.steps);
            Apply T = [&](const CVec& x) {
                CVec z = CVec::Zero(m * n);
                z.head(n) = x;
                return CVec(prop.propagate(z, opt.steps, false).tail(n));
            };
            Apply Tadj = [&](const CVec& y) {
                CVec z = CVec::Zero(m * n);
                z.tail(n) = y;
                return CVec(prop.propagate(z, opt.steps, true).head(n));
            };
            if (start.size() != n) start = random_start(static_cast<int>(n));
            return eta * lanczos_sigma(T, Tadj, opt.power_iter, opt.tol, start);
        };
        const double hint = k < static_cast<int>(opt.eta_hint.size()) ? opt.eta_hint[k] : 0.0;
        out[k] = maximize_eta(g, opt, false, hint);
        out[k].t = t;
    });
    return out;
}

} // namespace kfp
