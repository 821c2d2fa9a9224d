#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kfp/evolution.hpp"
#include "kfp/functionals.hpp"

namespace kfp {

inline constexpr const char* kVersion = "kfplab 0.3.0";

// Flat key-value run description. Unknown keys are rejected.
struct RunConfig {
    double gamma = 2.0;
    int dim = 1;             // d_x = d_v
    double v_max = 0.0;      // 0: smallest half-width with a negligible boundary Maxwellian
    int n_v = 0;             // 0: derived from h_v
    double h_v = 0.2;
    double l_x = 64.0;
    int n_x = 512;
    std::string scheme = "exact";
    double dt = 0.0;
    double t_max = 20.0;
    std::vector<double> snapshots; // empty: integer times 0..t_max
    double cutoff_radius = 4.0;
    double cutoff_strength = 10.0;
    double delta = 0.0;      // long-wave threshold, 0: automatic
    std::string weight = "unit";
    double D = 4.0;
    double alpha_weight = 0.02;
    double delta_weight = 0.5;
    double M = 0.0;          // cone speed, 0: calibrated from the run
    std::string initial = "fluid_bump";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "run";

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    std::string to_json() const; // canonical: sorted keys, full precision

    // All module preconditions that can be checked without computing anything.
    void validate() const;
    std::string hash() const; // FNV-1a of the canonical JSON, hex
    std::vector<double> snapshot_times() const;
    Scheme scheme_value() const;
    WeightParams weight_params() const;
    PotentialParams potential() const;
};

std::uint64_t fnv1a(const std::string& s);

} // namespace kfp
