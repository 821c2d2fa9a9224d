#include "kfp/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kfp/evolution.hpp"

namespace kfp {

WeightKind parse_weight_kind(const std::string& s) {
    if (s == "unit") return WeightKind::Unit;
    if (s == "exp_x") return WeightKind::ExpX;
    if (s == "exp_c") return WeightKind::ExpC;
    throw ConfigError("unknown weight '" + s + "' (unit, exp_x, exp_c)");
}

std::string to_string(WeightKind k) {
    switch (k) {
    case WeightKind::Unit: return "unit";
    case WeightKind::ExpX: return "exp_x";
    case WeightKind::ExpC: return "exp_c";
    }
    return "?";
}

void WeightParams::validate(double gamma) const {
    if (!(D > 0.0) || !(alpha_weight > 0.0) || !(delta_weight > 0.0) || !(M > 0.0))
        throw ConfigError("weight parameters D, alpha_weight, delta_weight, M must be positive");
    if (kind == WeightKind::ExpX && gamma < 1.5) throw ConfigError("exp_x weight requires gamma >= 3/2");
    if (kind == WeightKind::ExpC) {
        if (gamma >= 1.5) throw ConfigError("exp_c weight requires gamma < 3/2");
        if (!(alpha_weight * gamma < 0.05)) throw ConfigError("exp_c weight requires alpha_weight * gamma < 1/20");
    }
}

namespace {

void require_subexp(double gamma) {
    if (!(gamma > 0.0) || gamma >= 1.5) throw ConfigError("weight c/rho is defined for 0 < gamma < 3/2");
}

// Shared blend: y = delta*(<x> - Mt), possibly negative.
double blend(double y, double v2, double gamma) {
    const double jv = japanese(v2);
    const double s = y * std::pow(jv, gamma - 3.0);
    if (s <= 1.0) return 3.0 * std::pow(jv, gamma);
    const double chi = cutoff_chi(s);
    const double q = gamma / (3.0 - gamma);
    return 5.0 * std::pow(y, q) * (1.0 - chi) +
           ((1.0 - chi) * y * std::pow(jv, 2.0 * gamma - 3.0) + 3.0 * std::pow(jv, gamma)) * chi;
}

} // namespace

double weight_c(double x_abs, double v2, double gamma, double delta) {
    require_subexp(gamma);
    return blend(delta * japanese(x_abs * x_abs), v2, gamma);
}

double weight_rho(double t, double x_abs, double v2, double gamma, double delta, double M) {
    require_subexp(gamma);
    return blend(delta * (japanese(x_abs * x_abs) - M * t), v2, gamma);
}

Region partition_H(double t, double x_abs, double v2, double gamma, double delta, double M) {
    const double y = delta * (japanese(x_abs * x_abs) - M * t);
    const double edge = std::pow(japanese(v2), 3.0 - gamma);
    if (y >= 2.0 * edge) return Region::Plus;
    if (y <= edge) return Region::Minus;
    return Region::Zero;
}

double weight_w(double t, double x_abs, double D, double M) {
    return std::exp((japanese(x_abs * x_abs) - M * t) / (2.0 * D));
}

double weight_mu(const WeightParams& w, double gamma, double x_abs, double v2) {
    switch (w.kind) {
    case WeightKind::Unit: return 1.0;
    case WeightKind::ExpX: return std::exp(japanese(x_abs * x_abs) / w.D);
    case WeightKind::ExpC: return std::exp(w.alpha_weight * weight_c(x_abs, v2, gamma, w.delta_weight));
    }
    return 1.0;
}

// ---------------------------------------------------------------- macro fields

double alpha_fluid(const OperatorSet& ops) {
    const Vec v2 = ops.grid.nodes.rowwise().squaredNorm();
    return ops.cell() * (v2.array() * ops.sqrtM.array().square()).sum() / ops.grid.dim;
}

MacroFields macro_fields(const OperatorSet& ops, const Field& f) {
    const int d = ops.grid.dim;
    const long nx = f.values.rows();
    MacroFields m;
    m.alpha_fluid = alpha_fluid(ops);
    const Mat re = f.values.real();
    const Vec s = ops.sqrtM;
    m.a = ops.cell() * (re * s);
    m.b.resize(nx, d);
    for (int i = 0; i < d; ++i) m.b.col(i) = ops.cell() * (re * Vec(ops.velocity(i).array() * s.array()));
    // Gamma(P1 f) = int v_i v_j sqrtM P1 f
    const Vec a = m.a;
    m.Gamma.resize(nx, d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const Vec vv = ops.velocity(i).array() * ops.velocity(j).array() * s.array();
            const double vv0 = ops.cell() * vv.dot(s); // moment against P0 f = a sqrtM
            m.Gamma.col(i * d + j) = ops.cell() * (re * vv) - vv0 * a;
        }
    return m;
}

namespace {

// Mode coefficients of scalar fields stored column-wise over x-nodes.
CMat scalar_modes(const SpaceGrid& sg, const VelocityGrid& vg, const CMat& cols) {
    Field tmp;
    tmp.space = sg;
    tmp.velocity = vg;
    tmp.values = cols;
    return to_modes(tmp).coeffs;
}

CMat scalar_field(const SpaceGrid& sg, const VelocityGrid& vg, const CMat& modes) {
    ModeSet m;
    m.space = sg;
    m.coeffs = modes;
    return to_field(m, vg).values;
}

// Spatial divergence-type terms in mode space: returns (div b, grad a, div Gamma, force) per x-node.
struct FluxTerms {
    CMat div_b;    // nx x 1
    CMat grad_a;   // nx x d
    CMat div_G;    // nx x d
    Mat force;     // nx x d
};

FluxTerms flux_terms(const OperatorSet& ops, const Field& f) {
    const SpaceGrid& sg = f.space;
    const int d = ops.grid.dim;
    const long nx = sg.total();
    const MacroFields mf = macro_fields(ops, f);
    CMat cols(nx, 1 + d + d * d);
    cols.col(0) = mf.a.cast<cplx>();
    for (int i = 0; i < d; ++i) cols.col(1 + i) = mf.b.col(i).cast<cplx>();
    for (int k = 0; k < d * d; ++k) cols.col(1 + d + k) = mf.Gamma.col(k).cast<cplx>();
    const CMat modes = scalar_modes(sg, ops.grid, cols);
    CMat dm = CMat::Zero(nx, 1 + 2 * d);
    for (long k = 0; k < nx; ++k) {
        const Vec eta = sg.eta(k);
        cplx div_b = 0.0;
        for (int i = 0; i < d; ++i) div_b += cplx(0.0, eta(i)) * modes(k, 1 + i);
        dm(k, 0) = div_b;
        for (int i = 0; i < d; ++i) {
            dm(k, 1 + i) = cplx(0.0, eta(i)) * modes(k, 0);
            cplx g = 0.0;
            for (int j = 0; j < d; ++j) g += cplx(0.0, eta(j)) * modes(k, 1 + d + i * d + j);
            dm(k, 1 + d + i) = g;
        }
    }
    const CMat back = scalar_field(sg, ops.grid, dm);
    FluxTerms ft;
    ft.div_b = back.col(0);
    ft.grad_a = back.middleCols(1, d);
    ft.div_G = back.middleCols(1 + d, d);
    // force: int sqrtM dPhi/dv_i P1 f; dPhi/dv_i = v_i <v>^{gamma-2}
    ft.force.resize(nx, d);
    const Mat re = f.values.real();
    for (int i = 0; i < d; ++i) {
        const Vec g = ops.velocity(i).array() * ops.weight_pow(ops.params.gamma - 2.0).array() * ops.sqrtM.array();
        const double g0 = ops.cell() * g.dot(ops.sqrtM);
        ft.force.col(i) = ops.cell() * (re * g) - g0 * mf.a;
    }
    return ft;
}

} // namespace

FluidResidual fluid_residual(const OperatorSet& ops, const std::vector<Field>& traj) {
    if (traj.size() < 3) throw ConfigError("fluid residual needs at least 3 snapshots");
    const int d = ops.grid.dim;
    const double af = alpha_fluid(ops);
    FluidResidual r;
    for (size_t n = 1; n + 1 < traj.size(); ++n) {
        const double dt = traj[n + 1].time - traj[n - 1].time;
        if (!(dt > 0.0)) throw ConfigError("snapshot times must be increasing");
        const MacroFields mp = macro_fields(ops, traj[n + 1]);
        const MacroFields mm = macro_fields(ops, traj[n - 1]);
        const FluxTerms ft = flux_terms(ops, traj[n]);
        for (long x = 0; x < mp.a.size(); ++x) {
            const double da = (mp.a(x) - mm.a(x)) / dt;
            r.r_a = std::max(r.r_a, std::abs(da + ft.div_b(x, 0).real()));
            for (int i = 0; i < d; ++i) {
                const double db = (mp.b(x, i) - mm.b(x, i)) / dt;
                const double res = db + af * ft.grad_a(x, i).real() + ft.div_G(x, i).real() + ft.force(x, i);
                r.r_b = std::max(r.r_b, std::abs(res));
            }
        }
    }
    return r;
}

FluidResidual fluid_residual_generator(const OperatorSet& ops, const Field& f) {
    const SpaceGrid& sg = f.space;
    const int d = ops.grid.dim;
    // time derivative from the generator, mode by mode
    const ModeSet m = to_modes(f);
    ModeSet dm = m;
    const SpMat& L = ops.L;
    for (long k = 0; k < sg.total(); ++k) {
        const Vec eta = sg.eta(k);
        const CVec fk = m.coeffs.row(k).transpose();
        CVec g = L.cast<cplx>() * fk;
        for (int i = 0; i < d; ++i) g -= cplx(0.0, eta(i)) * (ops.velocity(i).cast<cplx>().array() * fk.array()).matrix();
        dm.coeffs.row(k) = g.transpose();
    }
    Field df = to_field(dm, ops.grid);
    df.values = df.values.real().cast<cplx>();
    const MacroFields dmf = macro_fields(ops, df);
    const FluxTerms ft = flux_terms(ops, f);
    const double af = alpha_fluid(ops);
    FluidResidual r;
    for (long x = 0; x < dmf.a.size(); ++x) {
        r.r_a = std::max(r.r_a, std::abs(dmf.a(x) + ft.div_b(x, 0).real()));
        for (int i = 0; i < d; ++i) {
            const double res = dmf.b(x, i) + af * ft.grad_a(x, i).real() + ft.div_G(x, i).real() + ft.force(x, i);
            r.r_b = std::max(r.r_b, std::abs(res));
        }
    }
    return r;
}

// ---------------------------------------------------------------- Lyapunov functionals

double rho_hat(const Vec& eta) { return std::min(1.0, eta.squaredNorm()); }

double weighted_v_norm2(const OperatorSet& ops, const CVec& f, double theta, double alpha_w) {
    const double g = ops.params.gamma;
    double s = 0.0;
    for (int j = 0; j < ops.size(); ++j) {
        const double jv = ops.jv(j);
        s += std::pow(jv, 2.0 * theta) * std::exp(alpha_w * std::pow(jv, g)) * std::norm(f(j));
    }
    return ops.cell() * s;
}

namespace {

cplx coupling(const OperatorSet& ops, const Vec& eta, const CVec& f) {
    const cplx a = ops.cell() * ops.sqrtM.cast<cplx>().dot(f); // dot conjugates the real sqrtM only
    cplx c = 0.0;
    for (int i = 0; i < eta.size(); ++i) {
        const Vec vs = ops.velocity(i).array() * ops.sqrtM.array();
        const cplx b = ops.cell() * vs.cast<cplx>().dot(f);
        c += cplx(0.0, eta(i)) * a * std::conj(b);
    }
    return c / (1.0 + eta.squaredNorm());
}

} // namespace

double kawashima_E(const OperatorSet& ops, const Vec& eta, const CVec& fhat, double kappa3) {
    return ops.norm(fhat) * ops.norm(fhat) + kappa3 * coupling(ops, eta, fhat).real();
}

double kawashima_E_tilde(const OperatorSet& ops, const Vec& eta, const CVec& fhat, double kappa3, double kappa4,
                         double kappa5, double alpha_weight) {
    const double E = kawashima_E(ops, eta, fhat, kappa3);
    if (eta.norm() <= 1.0) return E + kappa4 * weighted_v_norm2(ops, ops.P1(fhat), 0.0, alpha_weight);
    return E + kappa5 * weighted_v_norm2(ops, fhat, 0.0, alpha_weight);
}

namespace {

struct Series {
    std::vector<double> E, ref, diss;
};

LyapunovCheck evaluate(const Series& s, const Vec& eta, double dt) {
    LyapunovCheck c;
    c.values = s.E;
    c.equivalence_min = std::numeric_limits<double>::infinity();
    c.equivalence_max = 0.0;
    for (size_t n = 0; n < s.E.size(); ++n) {
        if (s.ref[n] <= 0.0) continue;
        const double q = s.E[n] / s.ref[n];
        c.equivalence_min = std::min(c.equivalence_min, q);
        c.equivalence_max = std::max(c.equivalence_max, q);
    }
    const double rh = rho_hat(eta);
    c.sigma_measured = std::numeric_limits<double>::infinity();
    for (size_t n = 0; n + 1 < s.E.size(); ++n) {
        c.max_defect = std::max(c.max_defect, (s.E[n + 1] - s.E[n]) / std::max(s.E[n], 1e-300));
        const double dis = dt * rh * 0.5 * (s.diss[n] + s.diss[n + 1]);
        if (dis > 0.0) c.sigma_measured = std::min(c.sigma_measured, (s.E[n] - s.E[n + 1]) / dis);
    }
    return c;
}

bool acceptable(const LyapunovCheck& c) {
    return c.equivalence_min >= 0.5 && c.equivalence_max <= 2.0 && c.sigma_measured > 0.0;
}

bool equivalent(const LyapunovCheck& c) { return c.equivalence_min >= 0.5 && c.equivalence_max <= 2.0; }

void require_traj(const std::vector<CVec>& traj, double dt) {
    if (traj.size() < 2) throw ConfigError("Lyapunov check needs at least two samples");
    if (!(dt > 0.0)) throw ConfigError("Lyapunov check needs dt > 0");
}

} // namespace

LyapunovCheck check_E_N(const OperatorSet& ops, const Vec& eta, const std::vector<CVec>& traj, double dt,
                        double kappa3) {
    require_traj(traj, dt);
    const double g = ops.params.gamma;
    LyapunovCheck best;
    for (int h = 0; h <= 10; ++h) {
        Series s;
        for (const auto& f : traj) {
            s.E.push_back(kawashima_E(ops, eta, f, kappa3));
            s.ref.push_back(ops.norm(f) * ops.norm(f));
            s.diss.push_back(weighted_v_norm2(ops, f, g - 1.0, 0.0));
        }
        LyapunovCheck c = evaluate(s, eta, dt);
        c.kappa3 = kappa3;
        c.kappa4 = c.kappa5 = 0.0;
        c.halvings = h;
        best = c;
        if (acceptable(c)) return c;
        kappa3 *= 0.5;
    }
    if (!equivalent(best)) throw NumericalError("E functional: equivalence failure after 10 halvings of kappa3");
    return best;
}

LyapunovCheck check_EL(const OperatorSet& ops, const Vec& eta, const std::vector<CVec>& traj, double dt,
                       double alpha_weight, double kappa3, double kappa4, double kappa5) {
    require_traj(traj, dt);
    const double g = ops.params.gamma;
    if (!(alpha_weight > 0.0) || !(alpha_weight * g < 0.05))
        throw ConfigError("weighted functional requires 0 < alpha_weight * gamma < 1/20");
    LyapunovCheck best;
    for (int h = 0; h <= 10; ++h) {
        Series s;
        for (const auto& f : traj) {
            s.E.push_back(kawashima_E_tilde(ops, eta, f, kappa3, kappa4, kappa5, alpha_weight));
            s.ref.push_back(weighted_v_norm2(ops, f, 0.0, alpha_weight));
            s.diss.push_back(weighted_v_norm2(ops, f, g - 1.0, alpha_weight));
        }
        LyapunovCheck c = evaluate(s, eta, dt);
        c.kappa3 = kappa3;
        c.kappa4 = kappa4;
        c.kappa5 = kappa5;
        c.halvings = h;
        best = c;
        if (acceptable(c)) return c;
        kappa3 *= 0.5;
        kappa4 *= 0.5;
        kappa5 *= 0.5;
    }
    if (!equivalent(best)) throw NumericalError("weighted functional: equivalence failure after 10 halvings");
    return best;
}

// ---------------------------------------------------------------- weighted norms

double weighted_sobolev_norm(const OperatorSet& ops, const Field& f, const WeightParams& w, int k) {
    if (k < 0 || k > 2) throw ConfigError("Sobolev order must be 0, 1 or 2");
    w.validate(ops.params.gamma);
    const SpaceGrid& sg = f.space;
    const int d = sg.dim_x;
    const long nx = sg.total();
    Mat mu(nx, ops.size());
    for (long i = 0; i < nx; ++i) {
        const double xa = sg.x(i).norm();
        for (int j = 0; j < ops.size(); ++j) mu(i, j) = weight_mu(w, ops.params.gamma, xa, ops.grid.nodes.row(j).squaredNorm());
    }
    const double vol = std::pow(sg.spacing(), d) * ops.cell();
    auto norm_mu = [&](const CMat& v) { return std::sqrt(vol * (v.cwiseAbs2().array() * mu.array()).sum()); };

    const ModeSet m = to_modes(f);
    double total = 0.0;
    // all multi-indices with |alpha| <= k
    std::vector<std::vector<int>> alphas{{}};
    for (int order = 0; order < k; ++order) {
        std::vector<std::vector<int>> next;
        for (const auto& a : alphas) {
            if (static_cast<int>(a.size()) != order) continue;
            const int start = a.empty() ? 0 : a.back();
            for (int axis = start; axis < d; ++axis) {
                auto b = a;
                b.push_back(axis);
                next.push_back(b);
            }
        }
        alphas.insert(alphas.end(), next.begin(), next.end());
    }
    for (const auto& a : alphas) {
        if (a.empty()) {
            total += norm_mu(f.values);
            continue;
        }
        ModeSet dm = m;
        for (long q = 0; q < nx; ++q) {
            const Vec eta = sg.eta(q);
            cplx factor = 1.0;
            for (int axis : a) factor *= cplx(0.0, eta(axis));
            dm.coeffs.row(q) *= factor;
        }
        total += norm_mu(to_field(dm, ops.grid).values);
    }
    return total;
}

} // namespace kfp
