#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kfp/evolution.hpp"

namespace kfp {

enum class Law { Power, Exp, PowerExp, StretchedExp, SpatialStretch };
std::string to_string(Law law);

struct Sample {
    double t = 0.0;
    double y = 0.0;
};

struct DecayFit {
    Law law = Law::Power;
    double q = 1.0;           // stretch exponent (stretched and spatial laws)
    double coefficient = 0.0; // prefactor (power) or rate c in e^{-c s^q}
    double exponent = 0.0;    // power exponent, or q for the stretched laws
    double residual = 0.0;    // max relative deviation on the held-out points
    double band95 = 0.0;      // half-width of the 95% interval of `exponent`
    double window[2] = {0.0, 0.0};
    int n_fit = 0;
    bool resolved = true;
    std::string note;
};

// y = c t^p. The last quarter of the samples (at least two) is held out for the residual.
DecayFit fit_power(const std::vector<Sample>& s);
// y = c e^{-r t}; exponent holds -r.
DecayFit fit_exp(const std::vector<Sample>& s);
// y = c t^p e^{r t}; exponent holds p, coefficient holds r.
DecayFit fit_power_exp(const std::vector<Sample>& s);
// y = A e^{-c t^q}.
DecayFit fit_stretched_exp(const std::vector<Sample>& s, double q);

struct QScan {
    std::vector<std::pair<double, double>> rows; // (q, rms log residual)
    double q_best = 0.0;
    double at_given = 0.0;
    double minimum = 0.0;
    bool certified = false; // residual at the given q within 10% of the scan minimum
};

QScan stretched_q_scan(const std::vector<Sample>& s, double q, int points = 41);

// Tail samples |f(t, x)|_{L^2_v} along rays |x| = s t, s in {2M, 2.5M, 3M}, above
// the noise floor. Per ray log|f| = c - C (<x> + t)^q with q shared.
struct TailFit {
    DecayFit fit;         // at the predicted q
    QScan scan;           // residual over q in [0.5 q, 1.5 q] plus a wide scan
    double q_predicted = 0.0;
    double q_best = 0.0;  // minimizer over [0.1, 2]
    int points = 0;
    int rays = 0;
};

double spatial_q(double gamma);
double stretch_q(double gamma);

TailFit spatial_tail_fit(const SpaceGrid& sg, const std::vector<TailProfile>& snapshots, double M, double gamma,
                         double noise_floor = 1e-13, double x_margin = 4.0);

struct HeatProfile {
    double t = 0.0;
    double defect = 0.0;   // sup_x |(1+t)^{d/2}(|f_L0| - mass G_t(x))|
    double variance = 0.0; // second x-moment of |f_L0|_{L^2_v}
};

// G_t the heat kernel with diffusivity a_gamma.
std::vector<HeatProfile> heat_profile_compare(const SpaceGrid& sg, const std::vector<TailProfile>& f_L0,
                                              double a_gamma, double mass);

// Strictly decreasing up to a relative slack; needs at least 4 values.
bool monotone_decreasing(const std::vector<double>& y, double slack = 0.05);

} // namespace kfp
