#include "kfp/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kfp {

std::string to_string(Law law) {
    switch (law) {
    case Law::Power: return "power";
    case Law::Exp: return "exp";
    case Law::PowerExp: return "power_exp";
    case Law::StretchedExp: return "stretched_exp";
    case Law::SpatialStretch: return "spatial_stretch";
    }
    return "?";
}

namespace {

// two-sided 95% Student t quantile
double t95(int dof) {
    static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                   2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086};
    if (dof < 1) return std::numeric_limits<double>::infinity();
    if (dof <= 20) return table[dof - 1];
    return 1.96 + 2.5 / dof;
}

struct LinFit {
    Vec beta;
    Vec se;
    double rms = 0.0;
};

LinFit lsq(const Mat& X, const Vec& y) {
    LinFit out;
    Eigen::ColPivHouseholderQR<Mat> qr(X);
    out.beta = qr.solve(y);
    const Vec r = y - X * out.beta;
    const int n = static_cast<int>(y.size()), p = static_cast<int>(X.cols());
    out.rms = std::sqrt(r.squaredNorm() / n);
    const double s2 = n > p ? r.squaredNorm() / (n - p) : 0.0;
    const Mat cov = s2 * (X.transpose() * X).inverse();
    out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

std::vector<Sample> sorted_checked(const std::vector<Sample>& s, size_t min_n) {
    if (s.size() < min_n) throw ConfigError("need at least " + std::to_string(min_n) + " samples");
    for (const auto& p : s) {
        if (!(p.y > 0.0)) throw ConfigError("samples must be positive");
        if (!(p.t > 0.0)) throw ConfigError("sample times must be positive");
    }
    std::vector<Sample> out = s;
    std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
    return out;
}

int holdout(size_t n) { return static_cast<int>(std::max<size_t>(2, n / 4)); }

// Fits log y on the basis columns over the leading points; residual on the held-out tail.
template <class Basis>
DecayFit generic_fit(const std::vector<Sample>& s0, Law law, int p, int exp_col, Basis basis) {
    const auto s = sorted_checked(s0, 8);
    const int n = static_cast<int>(s.size());
    const int nf = n - holdout(s.size());
    Mat X(nf, p);
    Vec y(nf);
    for (int i = 0; i < nf; ++i) {
        X.row(i) = basis(s[i].t).transpose();
        y(i) = std::log(s[i].y);
    }
    const LinFit lf = lsq(X, y);
    DecayFit f;
    f.law = law;
    f.n_fit = nf;
    f.window[0] = s.front().t;
    f.window[1] = s.back().t;
    f.exponent = lf.beta(exp_col);
    f.band95 = t95(nf - p) * lf.se(exp_col);
    f.coefficient = std::exp(lf.beta(0));
    for (int i = nf; i < n; ++i) {
        const double pred = std::exp(basis(s[i].t).dot(lf.beta));
        f.residual = std::max(f.residual, std::abs(pred / s[i].y - 1.0));
    }
    return f;
}

} // namespace

DecayFit fit_power(const std::vector<Sample>& s) {
    return generic_fit(s, Law::Power, 2, 1, [](double t) {
        Vec b(2);
        b << 1.0, std::log(t);
        return b;
    });
}

DecayFit fit_exp(const std::vector<Sample>& s) {
    return generic_fit(s, Law::Exp, 2, 1, [](double t) {
        Vec b(2);
        b << 1.0, t;
        return b;
    });
}

DecayFit fit_power_exp(const std::vector<Sample>& s) {
    // coefficient slot reports the exponential rate r instead of the prefactor
    const auto s2 = sorted_checked(s, 8);
    DecayFit f = generic_fit(s2, Law::PowerExp, 3, 1, [](double t) {
        Vec b(3);
        b << 1.0, std::log(t), t;
        return b;
    });
    const int nf = f.n_fit;
    Mat X(nf, 3);
    Vec y(nf);
    for (int i = 0; i < nf; ++i) {
        X.row(i) << 1.0, std::log(s2[i].t), s2[i].t;
        y(i) = std::log(s2[i].y);
    }
    f.coefficient = lsq(X, y).beta(2);
    return f;
}

DecayFit fit_stretched_exp(const std::vector<Sample>& s, double q) {
    if (!(q > 0.0)) throw ConfigError("stretch exponent must be positive");
    DecayFit f = generic_fit(s, Law::StretchedExp, 2, 1, [q](double t) {
        Vec b(2);
        b << 1.0, -std::pow(t, q);
        return b;
    });
    f.q = q;
    // rate c sits in the exponent slot of the generic fit; report q there instead
    f.coefficient = f.exponent;
    f.exponent = q;
    return f;
}

namespace {

double stretched_rms(const std::vector<Sample>& s, double q) {
    const int n = static_cast<int>(s.size());
    Mat X(n, 2);
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = -std::pow(s[i].t, q);
        y(i) = std::log(s[i].y);
    }
    return lsq(X, y).rms;
}

template <class F>
QScan scan_q(double q, int points, F rms) {
    QScan out;
    out.minimum = std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
        const double qq = q * (0.5 + static_cast<double>(i) / (points - 1));
        const double r = rms(qq);
        out.rows.emplace_back(qq, r);
        if (r < out.minimum) {
            out.minimum = r;
            out.q_best = qq;
        }
    }
    out.at_given = rms(q);
    out.certified = out.at_given <= 1.1 * out.minimum + 1e-12;
    return out;
}

} // namespace

QScan stretched_q_scan(const std::vector<Sample>& s0, double q, int points) {
    if (!(q > 0.0)) throw ConfigError("stretch exponent must be positive");
    if (points < 3) throw ConfigError("q scan needs at least 3 points");
    const auto s = sorted_checked(s0, 8);
    return scan_q(q, points, [&](double qq) { return stretched_rms(s, qq); });
}

double spatial_q(double gamma) { return std::min(1.0, gamma / (3.0 - gamma)); }
double stretch_q(double gamma) { return std::min(1.0, gamma / (2.0 - gamma)); }

namespace {

struct TailPoint {
    int ray;
    double X;  // <x> + t
    double lt; // log t
    double logy;
};

// Per ray: intercept, rate and (optionally) a log t prefactor; q shared. The
// prefactor is off in the fits: for small q, X^q and log t are nearly collinear.
double tail_rms(const std::vector<TailPoint>& pts, int nray, double q, bool prefactor, Vec* beta = nullptr) {
    const int n = static_cast<int>(pts.size());
    const int per = prefactor ? 3 : 2;
    Mat X = Mat::Zero(n, per * nray);
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        const int c = per * pts[i].ray;
        X(i, c) = 1.0;
        X(i, c + 1) = -std::pow(pts[i].X, q);
        if (prefactor) X(i, c + 2) = pts[i].lt;
        y(i) = pts[i].logy;
    }
    const LinFit lf = lsq(X, y);
    if (beta) *beta = lf.beta;
    return lf.rms;
}

// |f(t, x)|_{L^2_v} at |x| = r on the first axis, log-linear between nodes (both signs averaged)
double ray_value(const Vec& nv, const SpaceGrid& sg, double r) {
    const double h = sg.spacing();
    auto at = [&](double x) {
        const double u = (x + sg.l_x) / h;
        const long i = static_cast<long>(std::floor(u));
        const double w = u - i;
        const double a = nv(i), b = nv(std::min<long>(i + 1, sg.n_x - 1));
        if (!(a > 0.0) || !(b > 0.0)) return 0.0;
        return std::exp((1.0 - w) * std::log(a) + w * std::log(b));
    };
    return 0.5 * (at(r) + at(-r));
}

} // namespace

TailFit spatial_tail_fit(const SpaceGrid& sg, const std::vector<TailProfile>& snapshots, double M, double gamma,
                         double noise_floor, double x_margin) {
    if (!(M > 0.0)) throw ConfigError("wave speed must be positive");
    if (snapshots.empty()) throw ConfigError("no snapshots for the tail fit");
    if (sg.dim_x != 1) throw ConfigError("spatial tail fit is implemented for dim_x = 1");
    TailFit out;
    out.q_predicted = spatial_q(gamma);
    // rays x = s t inside the space-like cone
    const double speeds[] = {2.0 * M, 2.5 * M, 3.0 * M};
    std::vector<TailPoint> pts;
    int nray = 0;
    double xlo = std::numeric_limits<double>::infinity(), xhi = 0.0;
    for (const double sp : speeds) {
        int used = 0;
        for (const auto& f : snapshots) {
            if (!(f.t > 0.0)) continue;
            const double r = sp * f.t;
            if (r > sg.l_x - x_margin) continue;
            const double y = ray_value(f.nv, sg, r);
            if (!(y > noise_floor)) continue;
            pts.push_back({nray, japanese(r * r) + f.t, std::log(f.t), std::log(y)});
            xlo = std::min(xlo, r);
            xhi = std::max(xhi, r);
            ++used;
        }
        if (used >= 6) ++nray;
        else
            while (!pts.empty() && pts.back().ray == nray) pts.pop_back();
    }
    out.points = static_cast<int>(pts.size());
    out.rays = nray;
    out.fit.law = Law::SpatialStretch;
    out.fit.q = out.fit.exponent = out.q_predicted;
    if (nray == 0) {
        out.fit.resolved = false;
        out.fit.note = "unresolved";
        return out;
    }
    out.fit.window[0] = xlo;
    out.fit.window[1] = xhi;
    out.fit.n_fit = out.points;
    Vec beta;
    tail_rms(pts, nray, out.q_predicted, false, &beta);
    out.fit.coefficient = beta(1);
    for (const auto& p : pts) {
        const int c = 2 * p.ray;
        const double pred = beta(c) - beta(c + 1) * std::pow(p.X, out.q_predicted);
        out.fit.residual = std::max(out.fit.residual, std::abs(std::exp(pred - p.logy) - 1.0));
    }
    auto rms = [&](double q) { return tail_rms(pts, nray, q, false); };
    out.scan = scan_q(out.q_predicted, 41, rms);
    // wide scan, then golden refinement around the best grid point
    double best = 0.1, rbest = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 95; ++i) {
        const double q = 0.1 + 0.02 * i;
        const double r = rms(q);
        if (r < rbest) {
            rbest = r;
            best = q;
        }
    }
    double a = std::max(0.05, best - 0.02), b = best + 0.02;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 40; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (rms(c) < rms(d)) b = d;
        else a = c;
    }
    out.q_best = 0.5 * (a + b);
    out.fit.band95 = std::abs(out.q_best - out.q_predicted);
    return out;
}

std::vector<HeatProfile> heat_profile_compare(const SpaceGrid& sg, const std::vector<TailProfile>& f_L0,
                                              double a_gamma, double mass) {
    if (!(a_gamma > 0.0)) throw ConfigError("diffusivity must be positive");
    std::vector<HeatProfile> out;
    const int d = sg.dim_x;
    const double vol = std::pow(sg.spacing(), d);
    for (const auto& f : f_L0) {
        if (!(f.t > 0.0)) throw ConfigError("heat profile comparison needs t > 0");
        const double scale = std::pow(1.0 + f.t, 0.5 * d);
        const double norm = std::pow(4.0 * std::numbers::pi * a_gamma * f.t, -0.5 * d);
        const Vec& nv = f.nv;
        HeatProfile hp;
        hp.t = f.t;
        double m0 = 0.0, m2 = 0.0;
        for (long i = 0; i < sg.total(); ++i) {
            const double r2 = sg.x(i).squaredNorm();
            const double G = norm * std::exp(-r2 / (4.0 * a_gamma * f.t));
            hp.defect = std::max(hp.defect, scale * std::abs(nv(i) - std::abs(mass) * G));
            m0 += vol * nv(i);
            m2 += vol * nv(i) * r2;
        }
        hp.variance = m0 > 0.0 ? m2 / m0 / d : 0.0;
        out.push_back(hp);
    }
    return out;
}

bool monotone_decreasing(const std::vector<double>& y, double slack) {
    if (y.size() < 4) throw ConfigError("monotone trend check needs at least 4 points");
    for (size_t i = 1; i < y.size(); ++i)
        if (!(y[i] < y[i - 1] * (1.0 + slack))) return false;
    return true;
}

} // namespace kfp
