#include "kfp/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include "kfp/parallel.hpp"
#include "kfp/spectral.hpp"
#include "kfp/tridiag.hpp"

namespace kfp {

// ---------------------------------------------------------------- grids

SpaceGrid build_space_grid(double l_x, int n_x, int dim_x) {
    if (!(l_x > 0.0)) throw ConfigError("l_x must be positive");
    if (n_x < 2 || (n_x & (n_x - 1)) != 0) throw ConfigError("n_x must be a power of two");
    if (dim_x < 1 || dim_x > 3) throw ConfigError("dim_x must be 1, 2 or 3");
    if (l_x <= 1.0) throw ConfigError("l_x must exceed the support radius 1 of the initial data");
    SpaceGrid g;
    g.l_x = l_x;
    g.n_x = n_x;
    g.dim_x = dim_x;
    g.wavenumbers.resize(n_x);
    for (int k = 0; k < n_x; ++k) {
        const int ks = k < n_x / 2 ? k : k - n_x;
        g.wavenumbers[k] = std::numbers::pi * ks / l_x;
    }
    return g;
}

long SpaceGrid::total() const {
    long t = 1;
    for (int k = 0; k < dim_x; ++k) t *= n_x;
    return t;
}

std::vector<int> SpaceGrid::unflatten(long i) const {
    std::vector<int> idx(dim_x);
    for (int k = 0; k < dim_x; ++k) {
        idx[k] = static_cast<int>(i % n_x);
        i /= n_x;
    }
    return idx;
}

Vec SpaceGrid::eta(long mode) const {
    const auto idx = unflatten(mode);
    Vec e(dim_x);
    for (int k = 0; k < dim_x; ++k) e(k) = wavenumbers[idx[k]];
    return e;
}

Vec SpaceGrid::x(long node) const {
    const auto idx = unflatten(node);
    Vec e(dim_x);
    for (int k = 0; k < dim_x; ++k) e(k) = coord(idx[k]);
    return e;
}

long SpaceGrid::partner(long mode) const {
    const auto idx = unflatten(mode);
    long out = 0;
    long stride = 1;
    for (int k = 0; k < dim_x; ++k) {
        out += stride * ((n_x - idx[k]) % n_x);
        stride *= n_x;
    }
    return out;
}

namespace {

// In-place multi-dimensional FFT of one column laid out with axis 0 fastest.
void fft_column(const SpaceGrid& g, CVec& col, bool inverse) {
    Eigen::FFT<double> fft;
    const int n = g.n_x;
    std::vector<cplx> in(n), out(n);
    long stride = 1;
    const long total = g.total();
    for (int axis = 0; axis < g.dim_x; ++axis) {
        for (long base = 0; base < total; ++base) {
            // visit each line once: base must have index 0 along this axis
            if ((base / stride) % n != 0) continue;
            for (int j = 0; j < n; ++j) in[j] = col(base + j * stride);
            if (inverse) fft.inv(out, in);
            else fft.fwd(out, in);
            for (int j = 0; j < n; ++j) col(base + j * stride) = out[j];
        }
        stride *= n;
    }
}

double mode_sign(const SpaceGrid& g, long mode) {
    const auto idx = g.unflatten(mode);
    int s = 0;
    for (int k : idx) s += k;
    return (s % 2 == 0) ? 1.0 : -1.0;
}

} // namespace

ModeSet to_modes(const Field& f) {
    const SpaceGrid& g = f.space;
    ModeSet m;
    m.space = g;
    m.time = f.time;
    m.coeffs.resize(f.values.rows(), f.values.cols());
    const double vol = std::pow(g.spacing(), g.dim_x);
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
        CVec col = f.values.col(c);
        fft_column(g, col, false);
        for (long k = 0; k < g.total(); ++k) col(k) *= vol * mode_sign(g, k);
        m.coeffs.col(c) = col;
    }
    return m;
}

Field to_field(const ModeSet& m, const VelocityGrid& vg) {
    const SpaceGrid& g = m.space;
    Field f;
    f.space = g;
    f.velocity = vg;
    f.time = m.time;
    f.values.resize(m.coeffs.rows(), m.coeffs.cols());
    const double vol = std::pow(g.spacing(), g.dim_x);
    for (Eigen::Index c = 0; c < m.coeffs.cols(); ++c) {
        CVec col = m.coeffs.col(c);
        for (long k = 0; k < g.total(); ++k) col(k) *= mode_sign(g, k) / vol;
        fft_column(g, col, true);
        f.values.col(c) = col;
    }
    return f;
}

// ---------------------------------------------------------------- schemes

std::string Scheme::name() const {
    switch (kind) {
    case Kind::Exact: return "exact";
    case Kind::CN: return "cn";
    case Kind::Radau: return "radau";
    }
    return "?";
}

Scheme parse_scheme(const std::string& name, double dt) {
    if (name == "exact") return Scheme::exact();
    if (name == "cn" || name == "radau") {
        if (!(dt > 0.0)) throw ConfigError("scheme " + name + " needs dt > 0");
        return name == "cn" ? Scheme::cn(dt) : Scheme::radau(dt);
    }
    throw ConfigError("unknown scheme '" + name + "' (exact, cn, radau)");
}

namespace {

// Factorization of a shifted operator; Thomas algorithm when tridiagonal.
class ShiftedSolver {
public:
    explicit ShiftedSolver(const CSpMat& M) {
        tri_ = Tridiagonal::is_tridiagonal(M);
        if (tri_) {
            t_ = Tridiagonal::from_sparse(M);
            t_.factor();
        } else {
            lu_ = std::make_unique<Eigen::SparseLU<CSpMat>>();
            lu_->compute(M);
            if (lu_->info() != Eigen::Success) throw NumericalError("shifted factorization failed");
        }
    }

    void solve(CVec& b) const {
        if (tri_) t_.solve(b);
        else b = lu_->solve(b).eval();
    }

private:
    bool tri_ = false;
    Tridiagonal t_;
    std::unique_ptr<Eigen::SparseLU<CSpMat>> lu_;
};

CSpMat sparse_identity(int n) {
    CSpMat Id(n, n);
    Id.setIdentity();
    return Id;
}

} // namespace

struct ModePropagator::Impl {
    Scheme scheme;
    CSpMat A;
    int n = 0;
    // exact
    bool real_sym = false;
    Mat Vr;
    Vec Dr;
    CMat V, Vinv;
    CVec D;
    bool expm = false;
    CMat Adense;
    mutable std::vector<std::pair<double, CMat>> expm_cache; // uniform snapshot spacing reuses one exponential
    // stepping
    CSpMat half_plus; // I + dt/2 A
    std::vector<ShiftedSolver> solvers;
    bool fell_back = false;

    void init() {
        n = static_cast<int>(A.rows());
        if (scheme.kind == Scheme::Kind::Exact) init_exact();
        else init_stepping();
    }

    void init_exact() {
        // real symmetric when the transport term vanishes
        bool real = true;
        for (int k = 0; k < A.outerSize() && real; ++k)
            for (CSpMat::InnerIterator it(A, k); it; ++it)
                if (it.value().imag() != 0.0) {
                    real = false;
                    break;
                }
        if (real) {
            Eigen::SelfAdjointEigenSolver<Mat> es(Mat(CMat(A).real()));
            if (es.info() == Eigen::Success) {
                real_sym = true;
                Vr = es.eigenvectors();
                Dr = es.eigenvalues();
                return;
            }
        }
        Eigen::ComplexEigenSolver<CMat> es(CMat(A), true);
        bool ok = es.info() == Eigen::Success;
        if (ok) {
            V = es.eigenvectors();
            for (int j = 0; j < n; ++j) V.col(j).normalize();
            D = es.eigenvalues();
            Eigen::PartialPivLU<CMat> lu(V);
            Vinv = lu.inverse();
            const double cond = V.cwiseAbs().colwise().sum().maxCoeff() * Vinv.cwiseAbs().colwise().sum().maxCoeff();
            ok = std::isfinite(cond) && cond < 1e10;
        }
        if (!ok) {
            expm = true;
            fell_back = true;
            Adense = CMat(A);
        }
    }

    void init_stepping() {
        if (!(scheme.dt > 0.0)) throw ConfigError("stepping scheme needs dt > 0");
        const CSpMat Id = sparse_identity(n);
        if (scheme.kind == Scheme::Kind::CN) {
            half_plus = Id + (0.5 * scheme.dt) * A;
            solvers.emplace_back(CSpMat(Id - (0.5 * scheme.dt) * A));
        } else {
            for (const cplx p : radau_partial_fractions().poles) solvers.emplace_back(CSpMat(scheme.dt * A - p * Id));
        }
    }

    CVec step(const CVec& y) const {
        if (scheme.kind == Scheme::Kind::CN) {
            CVec r = half_plus * y;
            solvers[0].solve(r);
            return r;
        }
        const auto& rc = radau_partial_fractions();
        CVec out = CVec::Zero(y.size());
        for (size_t j = 0; j < solvers.size(); ++j) {
            CVec r = y;
            solvers[j].solve(r);
            out += rc.residues[j] * r;
        }
        return out;
    }

    CVec advance(const CVec& f, double t) const {
        if (t < 0.0) throw ConfigError("propagation time must be nonnegative");
        if (t == 0.0) return f;
        if (scheme.kind == Scheme::Kind::Exact) {
            if (real_sym) {
                const Vec e = (t * Dr.array()).exp().matrix();
                const CVec c = Vr.transpose().cast<cplx>() * f;
                return Vr.cast<cplx>() * (e.cast<cplx>().array() * c.array()).matrix();
            }
            if (expm) {
                for (const auto& [tc, E] : expm_cache)
                    if (tc == t) return E * f;
                if (expm_cache.size() >= 8) expm_cache.erase(expm_cache.begin());
                expm_cache.emplace_back(t, (t * Adense).exp());
                return expm_cache.back().second * f;
            }
            const CVec e = (t * D.array()).exp().matrix();
            return V * (e.array() * (Vinv * f).array()).matrix();
        }
        const double steps_real = t / scheme.dt;
        const long steps = std::lround(steps_real);
        if (std::abs(steps - steps_real) > 1e-8 * std::max(1.0, steps_real))
            throw ConfigError("time " + std::to_string(t) + " is not a multiple of dt");
        CVec y = f;
        for (long s = 0; s < steps; ++s) y = step(y);
        return y;
    }
};

ModePropagator::ModePropagator(const OperatorSet& ops, const Vec& eta, bool damped, const Scheme& scheme)
    : impl_(std::make_unique<Impl>()) {
    impl_->scheme = scheme;
    impl_->A = damped ? assemble_damped(ops, eta) : assemble_L_eta(ops, eta);
    impl_->init();
}

ModePropagator::ModePropagator(const CSpMat& A, const Scheme& scheme) : impl_(std::make_unique<Impl>()) {
    impl_->scheme = scheme;
    impl_->A = A;
    impl_->init();
}

ModePropagator::~ModePropagator() = default;
ModePropagator::ModePropagator(ModePropagator&&) noexcept = default;
ModePropagator& ModePropagator::operator=(ModePropagator&&) noexcept = default;

CVec ModePropagator::advance(const CVec& f, double t) const { return impl_->advance(f, t); }
bool ModePropagator::fell_back() const { return impl_->fell_back; }

CVec propagate_mode(const OperatorSet& ops, const Vec& eta, const CVec& fhat0, double t, const Scheme& scheme) {
    return ModePropagator(ops, eta, false, scheme).advance(fhat0, t);
}

CVec propagate_mode_damped(const OperatorSet& ops, const Vec& eta, const CVec& fhat0, double t,
                           const Scheme& scheme) {
    return ModePropagator(ops, eta, true, scheme).advance(fhat0, t);
}

// ---------------------------------------------------------------- field evolution

std::vector<ModeSet> evolve_modes(const OperatorSet& ops, const ModeSet& m0, const std::vector<double>& t_grid,
                                  const Scheme& scheme, const EvolveOptions& opt, EvolveReport* report) {
    const SpaceGrid& g = m0.space;
    if (g.dim_x != ops.grid.dim) throw ConfigError("dim_x must equal dim_v");
    if (m0.coeffs.cols() != ops.size()) throw ConfigError("mode data does not match the velocity grid");
    for (size_t k = 0; k < t_grid.size(); ++k) {
        if (t_grid[k] < m0.time) throw ConfigError("requested times must not precede the initial time");
        if (k > 0 && t_grid[k] < t_grid[k - 1]) throw ConfigError("requested times must be ascending");
    }
    const double t_max = t_grid.empty() ? m0.time : t_grid.back();
    if (opt.check_wrap && 2.0 * opt.wave_speed * t_max >= 0.8 * g.l_x)
        throw ConfigError("non-wrap violation: 2 M t_max = " + std::to_string(2.0 * opt.wave_speed * t_max) +
                          " is not below 0.8 l_x = " + std::to_string(0.8 * g.l_x));

    const long total = g.total();
    // real data: propagate one representative of each (eta, -eta) pair
    const bool real_data = true;
    std::vector<long> reps;
    for (long k = 0; k < total; ++k) {
        const long p = g.partner(k);
        bool conj_pair = real_data && (m0.coeffs.row(p) - m0.coeffs.row(k).conjugate()).cwiseAbs().maxCoeff() == 0.0;
        if (!conj_pair || k <= p) reps.push_back(k);
    }
    std::vector<char> is_rep(total, 0);
    for (long k : reps) is_rep[k] = 1;

    std::vector<ModeSet> out(t_grid.size());
    for (size_t j = 0; j < t_grid.size(); ++j) {
        out[j].space = g;
        out[j].time = t_grid[j];
        out[j].coeffs = CMat::Zero(total, ops.size());
    }
    std::vector<char> fb(reps.size(), 0), contraction(reps.size(), 1);
    parallel_for(static_cast<int>(reps.size()), opt.threads, [&](int r) {
        const long k = reps[r];
        const CVec f0 = m0.coeffs.row(k).transpose();
        if (f0.cwiseAbs().maxCoeff() == 0.0) return;
        ModePropagator prop(ops, g.eta(k), opt.damped, scheme);
        fb[r] = prop.fell_back();
        CVec f = f0;
        double t = m0.time;
        double prev_norm = f.norm();
        for (size_t j = 0; j < t_grid.size(); ++j) {
            f = prop.advance(f, t_grid[j] - t);
            t = t_grid[j];
            const double nrm = f.norm();
            if (nrm > prev_norm * (1.0 + 1e-10) + 1e-300) contraction[r] = 0;
            prev_norm = nrm;
            out[j].coeffs.row(k) = f.transpose();
        }
    });
    // fill partners by conjugation
    for (long k = 0; k < total; ++k) {
        if (is_rep[k]) continue;
        const long p = g.partner(k);
        for (auto& m : out) m.coeffs.row(k) = m.coeffs.row(p).conjugate();
    }
    if (report) {
        report->fell_back = std::any_of(fb.begin(), fb.end(), [](char c) { return c != 0; });
        report->contraction_ok = std::all_of(contraction.begin(), contraction.end(), [](char c) { return c != 0; });
        const CVec s = ops.sqrtM.cast<cplx>();
        const double m_init = (ops.cell() * (s.transpose() * m0.coeffs.row(0).transpose())(0)).real();
        report->mass0 = m_init;
        double drift = 0.0;
        for (auto& m : out) {
            const double mt = (ops.cell() * (s.transpose() * m.coeffs.row(0).transpose())(0)).real();
            drift = std::max(drift, std::abs(mt - m_init) / std::max(std::abs(m_init), 1e-300));
        }
        report->max_mass_drift = drift;
    }
    return out;
}

std::vector<Field> evolve_field(const OperatorSet& ops, const SpaceGrid& sgrid, const Field& f0,
                                const std::vector<double>& t_grid, const Scheme& scheme, const EvolveOptions& opt,
                                EvolveReport* report) {
    if (f0.values.rows() != sgrid.total()) throw ConfigError("initial field does not match the space grid");
    const ModeSet m0 = to_modes(f0);
    const auto modes = evolve_modes(ops, m0, t_grid, scheme, opt, report);
    std::vector<Field> out;
    out.reserve(modes.size());
    for (const auto& m : modes) out.push_back(to_field(m, ops.grid));
    if (report) {
        // recompute the drift from the reconstructed fields
        double drift = 0.0;
        const double m_init = total_mass(ops, f0);
        for (const auto& f : out)
            drift = std::max(drift, std::abs(total_mass(ops, f) - m_init) / std::max(std::abs(m_init), 1e-300));
        report->mass0 = m_init;
        report->max_mass_drift = drift;
    }
    return out;
}

// ---------------------------------------------------------------- data

double bump(double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double bump_fourier(double eta) {
    // double-exponential quadrature of 2 int_0^1 bump(x) cos(eta x) dx
    const double h = 1.0 / 256.0;
    double s = 0.0;
    for (int k = 0; k <= 4 * 256; ++k) {
        const double u = k * h;
        const double w = 0.5 * std::numbers::pi * std::sinh(u);
        const double x = std::tanh(w);
        const double ch = std::cosh(w);
        const double one_minus_x2 = 1.0 / (ch * ch);
        const double dx = 0.5 * std::numbers::pi * std::cosh(u) / (ch * ch);
        if (one_minus_x2 <= 0.0) break;
        const double b = std::exp(1.0 - 1.0 / one_minus_x2);
        if (b == 0.0) break;
        s += (k == 0 ? 0.5 : 1.0) * b * std::cos(eta * x) * dx;
    }
    return 2.0 * s * h;
}

Field make_field(const SpaceGrid& sg, const VelocityGrid& vg) {
    Field f;
    f.space = sg;
    f.velocity = vg;
    f.values = CMat::Zero(sg.total(), vg.size());
    return f;
}

Field fluid_bump(const OperatorSet& ops, const SpaceGrid& sg) {
    Field f = make_field(sg, ops.grid);
    for (long i = 0; i < sg.total(); ++i) {
        const double b = bump(sg.x(i).norm());
        if (b != 0.0) f.values.row(i) = (b * ops.sqrtM).cast<cplx>().transpose();
    }
    return f;
}

namespace {

Vec micro_profile(const OperatorSet& ops) {
    const Vec v2 = ops.grid.nodes.rowwise().squaredNorm();
    Vec g = ops.P1(Vec(v2.array() * ops.sqrtM.array()));
    return g / ops.norm(g);
}

} // namespace

Field micro_bump(const OperatorSet& ops, const SpaceGrid& sg) {
    Field f = make_field(sg, ops.grid);
    const Vec g = micro_profile(ops);
    for (long i = 0; i < sg.total(); ++i) {
        const double b = bump(sg.x(i).norm());
        if (b != 0.0) f.values.row(i) = (b * g).cast<cplx>().transpose();
    }
    return f;
}

Field white_noise(const OperatorSet& ops, const SpaceGrid& sg, std::uint64_t seed) {
    Field f = make_field(sg, ops.grid);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (long i = 0; i < sg.total(); ++i) {
        if (sg.x(i).norm() > 1.0) continue;
        for (int j = 0; j < ops.size(); ++j) f.values(i, j) = U(rng);
    }
    return f;
}

ModeSet bump_modes_exact(const SpaceGrid& sg, const Vec& profile) {
    if (sg.dim_x != 1) throw ConfigError("exact bump transform is implemented for dim_x = 1");
    ModeSet m;
    m.space = sg;
    m.coeffs.resize(sg.total(), profile.size());
    for (long k = 0; k < sg.total(); ++k)
        m.coeffs.row(k) = (bump_fourier(std::abs(sg.wavenumbers[k])) * profile).cast<cplx>().transpose();
    return m;
}

double total_mass(const OperatorSet& ops, const Field& f) {
    const double vol = std::pow(f.space.spacing(), f.space.dim_x);
    const CVec s = ops.sqrtM.cast<cplx>();
    return (vol * ops.cell() * (f.values * s).sum()).real();
}

double l2_norm(const OperatorSet& ops, const Field& f) {
    const double vol = std::pow(f.space.spacing(), f.space.dim_x);
    return std::sqrt(vol * ops.cell() * f.values.squaredNorm());
}

Vec velocity_norms(const OperatorSet& ops, const Field& f) {
    return (ops.cell() * f.values.rowwise().squaredNorm()).cwiseSqrt();
}

TailProfile tail_profile(const OperatorSet& ops, const Field& f) { return {f.time, velocity_norms(ops, f)}; }

double calibrate_wave_speed(const SpaceGrid& sg, const std::vector<TailProfile>& profiles, double t_min) {
    double M = 0.0;
    for (const auto& pr : profiles) {
        if (pr.t < t_min || pr.t <= 0.0) continue;
        const long total = sg.total();
        std::vector<std::pair<double, double>> pts(total);
        for (long i = 0; i < total; ++i) pts[i] = {japanese(sg.x(i).squaredNorm()), pr.nv(i) * pr.nv(i)};
        std::sort(pts.begin(), pts.end());
        const double sum = pr.nv.squaredNorm();
        double acc = 0.0;
        for (const auto& [jx, w] : pts) {
            acc += w;
            if (acc >= 0.999 * sum) {
                M = std::max(M, jx / (2.0 * pr.t));
                break;
            }
        }
    }
    return M;
}

double calibrate_wave_speed(const OperatorSet& ops, const std::vector<Field>& snapshots, double t_min) {
    if (snapshots.empty()) return 0.0;
    std::vector<TailProfile> pr;
    for (const auto& f : snapshots) pr.push_back(tail_profile(ops, f));
    return calibrate_wave_speed(snapshots.front().space, pr, t_min);
}

std::vector<RegularizationRow> regularization_probe(const OperatorSet& ops, const SpaceGrid& sg, const Field& h0,
                                                    const std::vector<double>& t_list, const WeightParams& w,
                                                    int threads) {
    w.validate(ops.params.gamma);
    EvolveOptions opt;
    opt.threads = threads;
    opt.damped = true;
    opt.check_wrap = false;
    const ModeSet m0 = to_modes(h0);
    const auto modes = evolve_modes(ops, m0, t_list, Scheme::exact(), opt);
    const long total = sg.total();
    const int nv = ops.size();
    Mat mu(total, nv);
    for (long i = 0; i < total; ++i) {
        const double xa = sg.x(i).norm();
        for (int j = 0; j < nv; ++j) mu(i, j) = weight_mu(w, ops.params.gamma, xa, ops.grid.nodes.row(j).squaredNorm());
    }
    const double vol = std::pow(sg.spacing(), sg.dim_x) * ops.cell();
    std::vector<RegularizationRow> rows;
    for (const auto& m : modes) {
        RegularizationRow row;
        row.t = m.time;
        const Field f = to_field(m, ops.grid);
        double gv = 0.0;
        for (const auto& D : ops.Dv) {
            const CMat d = f.values * D.transpose().cast<cplx>();
            gv += (d.cwiseAbs2().array() * mu.array()).sum();
        }
        row.grad_v = std::sqrt(vol * gv);
        double gx = 0.0;
        for (int axis = 0; axis < sg.dim_x; ++axis) {
            ModeSet dm = m;
            for (long k = 0; k < total; ++k) dm.coeffs.row(k) *= cplx(0.0, sg.eta(k)(axis));
            const Field df = to_field(dm, ops.grid);
            gx += (df.values.cwiseAbs2().array() * mu.array()).sum();
        }
        row.grad_x = std::sqrt(vol * gx);
        rows.push_back(row);
    }
    return rows;
}

} // namespace kfp
