#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kfp/functionals.hpp"
#include "kfp/velocity_ops.hpp"

namespace kfp {

struct SpaceGrid {
    double l_x = 64.0;
    int n_x = 512;
    int dim_x = 1;
    std::vector<double> wavenumbers; // per axis, FFT order: k = 0..n/2-1, -n/2..-1

    double spacing() const { return 2.0 * l_x / n_x; }
    long total() const;
    double coord(int j) const { return -l_x + j * spacing(); }
    // multi-index decomposition of a flat node/mode index (axis 0 fastest)
    std::vector<int> unflatten(long i) const;
    Vec eta(long mode) const;
    Vec x(long node) const;
    long partner(long mode) const; // index of -eta
};

SpaceGrid build_space_grid(double l_x, int n_x, int dim_x = 1);

struct Field {
    SpaceGrid space;
    VelocityGrid velocity;
    CMat values; // (x-node, v-node)
    double time = 0.0;
};

struct ModeSet {
    SpaceGrid space;
    CMat coeffs; // (mode, v-node), fhat(eta) = sum_x f(x) e^{-i eta x} h^d
    double time = 0.0;
};

ModeSet to_modes(const Field& f);
Field to_field(const ModeSet& m, const VelocityGrid& vg);

struct Scheme {
    enum class Kind { Exact, CN, Radau };
    Kind kind = Kind::Exact;
    double dt = 0.0;

    static Scheme exact() { return {Kind::Exact, 0.0}; }
    static Scheme cn(double dt) { return {Kind::CN, dt}; }
    static Scheme radau(double dt) { return {Kind::Radau, dt}; }
    std::string name() const;
};

Scheme parse_scheme(const std::string& name, double dt);

// Propagator for one wavenumber. Exact: eigendecomposition (matrix exponential
// when the eigenbasis is ill-conditioned). CN: trapezoidal rule. Radau: the
// three-stage Radau IIA rational approximant, L-stable and fifth order.
class ModePropagator {
public:
    ModePropagator(const OperatorSet& ops, const Vec& eta, bool damped, const Scheme& scheme);
    ModePropagator(const CSpMat& A, const Scheme& scheme);
    ~ModePropagator();
    ModePropagator(ModePropagator&&) noexcept;
    ModePropagator& operator=(ModePropagator&&) noexcept;

    // Advances f by time t >= 0 (t must be a multiple of dt for stepping schemes).
    CVec advance(const CVec& f, double t) const;
    bool fell_back() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

CVec propagate_mode(const OperatorSet& ops, const Vec& eta, const CVec& fhat0, double t, const Scheme& scheme);
CVec propagate_mode_damped(const OperatorSet& ops, const Vec& eta, const CVec& fhat0, double t,
                           const Scheme& scheme);

struct EvolveOptions {
    int threads = 1;
    bool damped = false;
    double wave_speed = 1.0;  // cone speed used for the wrap-around guard
    bool check_wrap = true;
};

struct EvolveReport {
    bool fell_back = false;
    double mass0 = 0.0;
    double max_mass_drift = 0.0; // relative
    bool contraction_ok = true;
};

std::vector<ModeSet> evolve_modes(const OperatorSet& ops, const ModeSet& m0, const std::vector<double>& t_grid,
                                  const Scheme& scheme, const EvolveOptions& opt = {},
                                  EvolveReport* report = nullptr);

std::vector<Field> evolve_field(const OperatorSet& ops, const SpaceGrid& sgrid, const Field& f0,
                                const std::vector<double>& t_grid, const Scheme& scheme,
                                const EvolveOptions& opt = {}, EvolveReport* report = nullptr);

// Initial data
double bump(double x_abs);
Field make_field(const SpaceGrid& sg, const VelocityGrid& vg);
Field fluid_bump(const OperatorSet& ops, const SpaceGrid& sg);
Field micro_bump(const OperatorSet& ops, const SpaceGrid& sg);
Field white_noise(const OperatorSet& ops, const SpaceGrid& sg, std::uint64_t seed);
// Mode coefficients of bump(x) g(v) from the continuous Fourier transform of the bump.
ModeSet bump_modes_exact(const SpaceGrid& sg, const Vec& profile);
double bump_fourier(double eta_abs);

double total_mass(const OperatorSet& ops, const Field& f);
double l2_norm(const OperatorSet& ops, const Field& f);
// |f(t, x)|_{L^2_v} per x-node
Vec velocity_norms(const OperatorSet& ops, const Field& f);

// |f(t, x)|_{L^2_v} per x-node; keeps long runs light on memory.
struct TailProfile {
    double t = 0.0;
    Vec nv;
};

TailProfile tail_profile(const OperatorSet& ops, const Field& f);

// Smallest speed with 99.9% of |f|^2 inside <x> <= 2 M t, maximized over snapshots with t >= t_min.
double calibrate_wave_speed(const OperatorSet& ops, const std::vector<Field>& snapshots, double t_min = 5.0);
double calibrate_wave_speed(const SpaceGrid& sg, const std::vector<TailProfile>& profiles, double t_min = 5.0);

struct RegularizationRow {
    double t = 0.0;
    double grad_v = 0.0;
    double grad_x = 0.0;
};

std::vector<RegularizationRow> regularization_probe(const OperatorSet& ops, const SpaceGrid& sg, const Field& h0,
                                                    const std::vector<double>& t_list, const WeightParams& w,
                                                    int threads = 1);

} // namespace kfp
