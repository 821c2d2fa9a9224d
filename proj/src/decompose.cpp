#include "kfp/decompose.hpp"

#include <cmath>

#include "kfp/parallel.hpp"

namespace kfp {

std::pair<ModeSet, ModeSet> longwave_split(const ModeSet& m, double delta) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    ModeSet L = m, S = m;
    for (long k = 0; k < m.space.total(); ++k) {
        if (m.space.eta(k).norm() < delta) S.coeffs.row(k).setZero();
        else L.coeffs.row(k).setZero();
    }
    return {L, S};
}

EigenMap longwave_eigendata(const OperatorSet& ops, const SpaceGrid& sg, double delta, int threads) {
    EigenMap out;
    std::vector<long> modes;
    for (long k = 0; k < sg.total(); ++k)
        if (sg.eta(k).norm() < delta) modes.push_back(k);
    if (sg.dim_x == 1) {
        // one branch along eta >= 0; eta < 0 by conjugation (L_{-eta} = conj L_eta)
        std::vector<double> etas;
        std::vector<long> pos;
        for (long k : modes)
            if (sg.wavenumbers[k] >= 0.0) {
                etas.push_back(sg.wavenumbers[k]);
                pos.push_back(k);
            }
        std::vector<size_t> order(etas.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return etas[a] < etas[b]; });
        std::vector<double> sorted;
        for (size_t i : order) sorted.push_back(etas[i]);
        const auto branch = eigen_branch(ops, sorted);
        for (size_t r = 0; r < order.size(); ++r) {
            const long k = pos[order[r]];
            out[k] = branch[r];
            const long p = sg.partner(k);
            if (p != k) {
                ModeEigenData c = branch[r];
                c.eta = -c.eta;
                c.lambda = std::conj(c.lambda);
                c.e_D = c.e_D.conjugate();
                out[p] = c;
            }
        }
        return out;
    }
    std::vector<ModeEigenData> data(modes.size());
    parallel_for(static_cast<int>(modes.size()), threads,
                 [&](int i) { data[i] = leading_eigenpair(ops, sg.eta(modes[i])); });
    for (size_t i = 0; i < modes.size(); ++i) out[modes[i]] = data[i];
    return out;
}

std::pair<ModeSet, ModeSet> fluid_split(const OperatorSet& ops, const ModeSet& m_long, const EigenMap& eig) {
    ModeSet F = m_long, P = m_long;
    F.coeffs.setZero();
    for (long k = 0; k < m_long.space.total(); ++k) {
        const CVec f = m_long.coeffs.row(k).transpose();
        if (f.cwiseAbs().maxCoeff() == 0.0) continue;
        const auto it = eig.find(k);
        if (it == eig.end())
            throw NumericalError("missing eigendata for long-wave mode " + std::to_string(k));
        F.coeffs.row(k) = apply_projector(ops, it->second, f).transpose();
    }
    P.coeffs = m_long.coeffs - F.coeffs;
    return {F, P};
}

SpectralSplit spectral_split(const OperatorSet& ops, const ModeSet& m, double delta, const EigenMap& eig) {
    const auto [L, S] = longwave_split(m, delta);
    const auto [F, P] = fluid_split(ops, L, eig);
    SpectralSplit out;
    out.delta = delta;
    out.f_L = to_field(L, ops.grid);
    out.f_S = to_field(S, ops.grid);
    out.f_L0 = to_field(F, ops.grid);
    out.f_Lperp = to_field(P, ops.grid);
    return out;
}

namespace {

CSpMat augmented_generator(const OperatorSet& ops, const Vec& eta) {
    const int n = ops.size();
    const CSpMat A = assemble_damped(ops, eta);
    const CSpMat Lf = assemble_L_eta(ops, eta);
    std::vector<Eigen::Triplet<cplx>> trip;
    auto put = [&](const CSpMat& M, int br, int bc) {
        for (int c = 0; c < M.outerSize(); ++c)
            for (CSpMat::InnerIterator it(M, c); it; ++it)
                trip.emplace_back(br * n + it.row(), bc * n + it.col(), it.value());
    };
    for (int b = 0; b < 4; ++b) put(A, b, b);
    put(Lf, 4, 4);
    for (int b = 1; b <= 4; ++b)
        for (int i = 0; i < n; ++i)
            if (ops.K(i) != 0.0) trip.emplace_back(b * n + i, (b - 1) * n + i, ops.K(i));
    CSpMat B(5 * n, 5 * n);
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
}

} // namespace

std::vector<WaveParts> picard_waves(const OperatorSet& ops, const ModeSet& f0, const std::vector<double>& t_grid,
                                    const Scheme& scheme, int threads) {
    if (scheme.kind == Scheme::Kind::Exact) throw ConfigError("picard_waves needs a stepping scheme (cn or radau)");
    const SpaceGrid& sg = f0.space;
    const int n = ops.size();
    const long total = sg.total();
    std::vector<WaveParts> out(t_grid.size());
    for (size_t j = 0; j < t_grid.size(); ++j) {
        if (j > 0 && t_grid[j] < t_grid[j - 1]) throw ConfigError("requested times must be ascending");
        out[j].time = t_grid[j];
        ModeSet z = f0;
        z.time = t_grid[j];
        z.coeffs = CMat::Zero(total, n);
        out[j].h.assign(4, z);
        out[j].W3 = out[j].R3 = out[j].R3_solved = z;
    }
    std::vector<ModeSet> f_t(t_grid.size());
    for (size_t j = 0; j < t_grid.size(); ++j) {
        f_t[j] = out[j].W3;
    }
    // canonical representatives; partners filled by conjugation (real data)
    std::vector<long> reps;
    std::vector<char> is_rep(total, 0);
    for (long k = 0; k < total; ++k)
        if (k <= sg.partner(k)) {
            reps.push_back(k);
            is_rep[k] = 1;
        }
    parallel_for(static_cast<int>(reps.size()), threads, [&](int r) {
        const long k = reps[r];
        const CVec g0 = f0.coeffs.row(k).transpose();
        if (g0.cwiseAbs().maxCoeff() == 0.0) return;
        const Vec eta = sg.eta(k);
        const ModePropagator aug(augmented_generator(ops, eta), scheme);
        const ModePropagator full(ops, eta, false, scheme);
        CVec y = CVec::Zero(5 * n);
        y.head(n) = g0;
        CVec f = g0;
        double t = f0.time;
        for (size_t j = 0; j < t_grid.size(); ++j) {
            y = aug.advance(y, t_grid[j] - t);
            f = full.advance(f, t_grid[j] - t);
            t = t_grid[j];
            CVec W = CVec::Zero(n);
            for (int b = 0; b < 4; ++b) {
                out[j].h[b].coeffs.row(k) = y.segment(b * n, n).transpose();
                W += y.segment(b * n, n);
            }
            out[j].W3.coeffs.row(k) = W.transpose();
            out[j].R3.coeffs.row(k) = (f - W).transpose();
            out[j].R3_solved.coeffs.row(k) = y.segment(4 * n, n).transpose();
            f_t[j].coeffs.row(k) = f.transpose();
        }
    });
    for (size_t j = 0; j < t_grid.size(); ++j) {
        auto fill = [&](ModeSet& m) {
            for (long k = 0; k < total; ++k)
                if (!is_rep[k]) m.coeffs.row(k) = m.coeffs.row(sg.partner(k)).conjugate();
        };
        for (auto& h : out[j].h) fill(h);
        fill(out[j].W3);
        fill(out[j].R3);
        fill(out[j].R3_solved);
        fill(f_t[j]);
        const double fn = std::max(f_t[j].coeffs.norm(), 1e-300);
        out[j].consistency_residual = (out[j].R3.coeffs - out[j].R3_solved.coeffs).norm() / fn;
        out[j].split_residual = (f_t[j].coeffs - out[j].W3.coeffs - out[j].R3.coeffs).norm() / fn;
    }
    return out;
}

double mode_norm(const ModeSet& m, const OperatorSet& ops, int k) {
    const SpaceGrid& sg = m.space;
    double s = 0.0;
    for (long q = 0; q < sg.total(); ++q) {
        const double w = k == 0 ? 1.0 : std::pow(sg.eta(q).norm(), 2 * k);
        if (w == 0.0) continue;
        s += w * m.coeffs.row(q).squaredNorm();
    }
    return std::sqrt(ops.cell() * s / std::pow(2.0 * sg.l_x, sg.dim_x));
}

std::vector<GrowthRow> derivative_growth_table(const OperatorSet& ops, const std::vector<WaveParts>& parts, int k) {
    if (k < 1 || k > 2) throw ConfigError("derivative order must be 1 or 2");
    std::vector<GrowthRow> rows;
    for (const auto& p : parts)
        for (int j = 0; j < 4; ++j) rows.push_back({p.time, j, mode_norm(p.h[j], ops, k)});
    return rows;
}

} // namespace kfp
