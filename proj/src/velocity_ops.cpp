#include "kfp/velocity_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace kfp {

void PotentialParams::validate() const {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(cutoff_radius > 0.0)) throw ConfigError("cutoff_radius must be positive");
    if (!(cutoff_strength > 0.0)) throw ConfigError("cutoff_strength must be positive");
    if (longwave_delta < 0.0) throw ConfigError("longwave_delta must be nonnegative");
    if (dim_v < 1 || dim_v > 3) throw ConfigError("dim_v must be 1, 2 or 3");
}

VelocityGrid build_grid(double v_max, int n_per_axis, int dim) {
    if (n_per_axis < 3) throw ConfigError("n_per_axis must be at least 3");
    if (n_per_axis % 2 == 0) throw ConfigError("n_per_axis must be odd so that v=0 is a node");
    if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");
    if (dim < 1 || dim > 3) throw ConfigError("velocity dimension must be 1, 2 or 3");

    VelocityGrid g;
    g.v_max = v_max;
    g.n_per_axis = n_per_axis;
    g.dim = dim;
    g.spacing = 2.0 * v_max / (n_per_axis - 1);
    long total = 1;
    for (int k = 0; k < dim; ++k) total *= n_per_axis;
    g.nodes.resize(total, dim);
    for (long i = 0; i < total; ++i) {
        long rem = i;
        for (int k = 0; k < dim; ++k) {
            const int ik = static_cast<int>(rem % n_per_axis);
            rem /= n_per_axis;
            // symmetric construction keeps v -> -v exact in floating point
            const int c = ik - (n_per_axis - 1) / 2;
            g.nodes(i, k) = c * g.spacing;
        }
    }
    g.quadrature_weights = Vec::Constant(total, std::pow(g.spacing, dim));
    return g;
}

double japanese(double r2) { return std::sqrt(1.0 + r2); }

namespace {

double sigma_bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
double sigma_bump_prime(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

double log_partition(double gamma, int dim, double r_max) {
    // radial quadrature of exp(-<v>^gamma/gamma) over the ball of radius r_max
    const int n = 20000;
    const double dr = r_max / n;
    double surface = 2.0;
    if (dim == 2) surface = 2.0 * std::numbers::pi;
    if (dim == 3) surface = 4.0 * std::numbers::pi;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double r = i * dr;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        s += w * std::exp(-phi_shape(r * r, gamma)) * std::pow(r, dim - 1);
    }
    return std::log(surface * s * dr);
}

} // namespace

double cutoff_chi(double s) {
    const double a = sigma_bump(2.0 - s);
    const double b = sigma_bump(s - 1.0);
    return a / (a + b);
}

double cutoff_chi_prime(double s) {
    const double a = sigma_bump(2.0 - s);
    const double b = sigma_bump(s - 1.0);
    const double da = -sigma_bump_prime(2.0 - s);
    const double db = sigma_bump_prime(s - 1.0);
    return (da * b - a * db) / ((a + b) * (a + b));
}

double phi_shape(double r2, double gamma) { return std::pow(japanese(r2), gamma) / gamma; }

double schrodinger_potential(double r2, double gamma, int dim) {
    const double jv = japanese(r2);
    const double grad2 = r2 * std::pow(jv, 2.0 * gamma - 4.0);
    const double lap = dim * std::pow(jv, gamma - 2.0) + (gamma - 2.0) * r2 * std::pow(jv, gamma - 4.0);
    return 0.25 * grad2 - 0.5 * lap;
}

double suggest_v_max(double gamma, int dim, double spacing, double tol) {
    if (!(gamma > 0.0) || !(spacing > 0.0)) throw ConfigError("suggest_v_max: bad arguments");
    double v = 8.0;
    for (int it = 0; it < 50; ++it) {
        const double phi0 = log_partition(gamma, dim, std::max(v, 8.0));
        const double target = -2.0 * std::log(tol) - phi0;
        const double jv = std::pow(gamma * target, 1.0 / gamma);
        const double next = std::sqrt(std::max(jv * jv - 1.0, 1.0));
        if (std::abs(next - v) < 1e-6 * next) {
            v = next;
            break;
        }
        v = next;
    }
    return std::ceil(v / spacing - 1e-9) * spacing;
}

VelocityGrid grid_for(double gamma, double spacing, int dim, double tol) {
    const double v_max = suggest_v_max(gamma, dim, spacing, tol);
    const int half = static_cast<int>(std::lround(v_max / spacing));
    return build_grid(half * spacing, 2 * half + 1, dim);
}

Maxwellian maxwellian(const VelocityGrid& grid, const PotentialParams& params) {
    params.validate();
    const int n = grid.size();
    Vec phi(n);
    for (int i = 0; i < n; ++i) phi(i) = phi_shape(grid.nodes.row(i).squaredNorm(), params.gamma);
    const double pmin = phi.minCoeff();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(-(phi(i) - pmin));
    Maxwellian m;
    m.phi0 = -pmin + std::log(s * grid.cell());
    const double boundary_phi = phi_shape(grid.v_max * grid.v_max, params.gamma) + m.phi0;
    const double boundary_mass = std::exp(-boundary_phi);
    if (boundary_mass > 1e-10)
        throw ConfigError("velocity grid too small: boundary Maxwellian mass " +
                          std::to_string(boundary_mass) + " exceeds 1e-10");
    m.boundary_sqrtM = std::exp(-0.5 * boundary_phi);
    m.sqrtM.resize(n);
    for (int i = 0; i < n; ++i) m.sqrtM(i) = std::exp(-0.5 * (phi(i) + m.phi0));
    return m;
}

namespace {

// Visits the in-grid nearest neighbours of node i along every axis.
template <class F>
void for_neighbours(const VelocityGrid& g, int i, F&& fn) {
    long stride = 1;
    long rem = i;
    for (int k = 0; k < g.dim; ++k) {
        const int ik = static_cast<int>(rem % g.n_per_axis);
        rem /= g.n_per_axis;
        if (ik > 0) fn(static_cast<int>(i - stride), k, -1);
        if (ik < g.n_per_axis - 1) fn(static_cast<int>(i + stride), k, +1);
        stride *= g.n_per_axis;
    }
}

} // namespace

SpMat assemble_L(const VelocityGrid& grid, const PotentialParams& params) {
    params.validate();
    const int n = grid.size();
    const double ih2 = 1.0 / (grid.spacing * grid.spacing);
    Vec phi(n);
    for (int i = 0; i < n; ++i) phi(i) = phi_shape(grid.nodes.row(i).squaredNorm(), params.gamma);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * (2 * grid.dim + 1));
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for_neighbours(grid, i, [&](int j, int, int) {
            trip.emplace_back(i, j, ih2);
            diag -= std::exp(-0.5 * (phi(j) - phi(i))) * ih2;
        });
        trip.emplace_back(i, i, diag);
    }
    SpMat L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

SpMat assemble_L_literal(const VelocityGrid& grid, const PotentialParams& params) {
    params.validate();
    const int n = grid.size();
    const double ih2 = 1.0 / (grid.spacing * grid.spacing);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) {
        for_neighbours(grid, i, [&](int j, int, int) { trip.emplace_back(i, j, ih2); });
        const double V = schrodinger_potential(grid.nodes.row(i).squaredNorm(), params.gamma, grid.dim);
        trip.emplace_back(i, i, -2.0 * grid.dim * ih2 - V);
    }
    SpMat L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

LambdaK split_lambda_K(const SpMat& L, const VelocityGrid& grid, const PotentialParams& params) {
    const int n = grid.size();
    LambdaK out;
    out.K.resize(n);
    for (int i = 0; i < n; ++i) {
        const double r = grid.nodes.row(i).norm();
        out.K(i) = params.cutoff_strength * cutoff_chi(r / params.cutoff_radius);
    }
    SpMat Kd(n, n);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i)
        if (out.K(i) != 0.0) trip.emplace_back(i, i, out.K(i));
    Kd.setFromTriplets(trip.begin(), trip.end());
    out.Lambda = -L + Kd;
    return out;
}

Projections projections(const Vec& sqrtM, double cell) {
    const int n = static_cast<int>(sqrtM.size());
    Projections p;
    p.P0 = cell * sqrtM * sqrtM.transpose();
    p.P1 = Mat::Identity(n, n) - p.P0;
    return p;
}

Vec OperatorSet::weight_pow(double s) const { return jv.array().pow(s).matrix(); }

double OperatorSet::norm(const Vec& f) const { return std::sqrt(cell() * f.squaredNorm()); }
double OperatorSet::norm(const CVec& f) const { return std::sqrt(cell() * f.squaredNorm()); }

cplx OperatorSet::pair(const CVec& f, const CVec& g) const {
    return cell() * (f.array() * g.array()).sum();
}

Vec OperatorSet::P0(const Vec& f) const { return (cell() * sqrtM.dot(f)) * sqrtM; }
Vec OperatorSet::P1(const Vec& f) const { return f - P0(f); }
CVec OperatorSet::P0(const CVec& f) const {
    const cplx c = cell() * (sqrtM.cast<cplx>().array() * f.array()).sum();
    return c * sqrtM.cast<cplx>();
}
CVec OperatorSet::P1(const CVec& f) const { return f - P0(f); }

OperatorSet build_operator_set(const VelocityGrid& grid, const PotentialParams& params) {
    params.validate();
    if (params.dim_v != grid.dim) throw ConfigError("dim_v does not match the velocity grid");
    OperatorSet ops;
    ops.grid = grid;
    ops.params = params;
    const Maxwellian m = maxwellian(grid, params);
    ops.params.phi0 = m.phi0;
    ops.sqrtM = m.sqrtM;
    ops.boundary_sqrtM = m.boundary_sqrtM;
    ops.L = assemble_L(grid, params);
    LambdaK lk = split_lambda_K(ops.L, grid, params);
    ops.Lambda = std::move(lk.Lambda);
    ops.K = std::move(lk.K);

    const int n = grid.size();
    const double ih = 0.5 / grid.spacing;
    for (int k = 0; k < grid.dim; ++k) {
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < n; ++i)
            for_neighbours(grid, i, [&](int j, int axis, int dir) {
                if (axis == k) trip.emplace_back(i, j, dir * ih);
            });
        SpMat D(n, n);
        D.setFromTriplets(trip.begin(), trip.end());
        ops.Dv.push_back(std::move(D));
    }
    ops.jv.resize(n);
    for (int i = 0; i < n; ++i) ops.jv(i) = japanese(grid.nodes.row(i).squaredNorm());
    return ops;
}

double sigma_norm(const OperatorSet& ops, const Vec& f) {
    const Vec w = ops.weight_pow(ops.params.gamma - 1.0);
    double s = (w.array() * f.array()).square().sum();
    for (const auto& D : ops.Dv) s += (D * f).squaredNorm();
    return std::sqrt(ops.cell() * s);
}

double sigma_norm(const OperatorSet& ops, const CVec& f) {
    const Vec w = ops.weight_pow(ops.params.gamma - 1.0);
    double s = (w.cast<cplx>().array() * f.array()).abs2().sum();
    for (const auto& D : ops.Dv) s += (D.cast<cplx>() * f).squaredNorm();
    return std::sqrt(ops.cell() * s);
}

namespace {

// Householder reflector H with H s = |s| e1; returns H A H without the first row and column.
Mat deflate(const Mat& A, const Vec& s) {
    Vec u = s;
    u(0) += (s(0) >= 0 ? 1.0 : -1.0) * s.norm();
    const double beta = 2.0 / u.squaredNorm();
    const Vec p = A * u;
    const double upu = u.dot(p);
    Mat B = A;
    B.noalias() -= beta * u * p.transpose();
    B.noalias() -= beta * p * u.transpose();
    B.noalias() += (beta * beta * upu) * u * u.transpose();
    const int n = static_cast<int>(A.rows());
    return B.bottomRightCorner(n - 1, n - 1);
}

} // namespace

double coercivity_constant(const OperatorSet& ops) {
    const Mat A = -Mat(ops.L);
    Mat S = Mat(ops.weight_pow(2.0 * (ops.params.gamma - 1.0)).asDiagonal());
    for (const auto& D : ops.Dv) S += Mat(SpMat(D.transpose() * D));
    const Mat Ad = deflate(A, ops.sqrtM);
    const Mat Sd = deflate(S, ops.sqrtM);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Ad, Sd, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("coercivity: generalized eigensolve failed");
    const double nu0 = es.eigenvalues().minCoeff();
    if (!(nu0 > 1e-12)) throw NumericalError("coercivity: nonpositive constant " + std::to_string(nu0));
    return nu0;
}

double max_rayleigh(const SpMat& L) {
    const Mat S = 0.5 * (Mat(L) + Mat(L).transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double symmetry_defect(const SpMat& L) {
    const SpMat d = L - SpMat(L.transpose());
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SpMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

} // namespace kfp
