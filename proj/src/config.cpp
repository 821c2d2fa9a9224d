#include "kfp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kfp {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {
        "gamma", "dim", "v_max", "n_v", "h_v", "l_x", "n_x", "scheme", "dt", "t_max", "snapshots",
        "cutoff_radius", "cutoff_strength", "delta", "weight", "D", "alpha_weight", "delta_weight", "M",
        "initial", "seed", "threads", "out"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
        if (v.is_object() || (v.is_array() && k != "snapshots"))
            throw ConfigError("config is flat: key '" + k + "' must hold a scalar");
    }
    RunConfig c;
    take(j, "gamma", c.gamma);
    take(j, "dim", c.dim);
    take(j, "v_max", c.v_max);
    take(j, "n_v", c.n_v);
    take(j, "h_v", c.h_v);
    take(j, "l_x", c.l_x);
    take(j, "n_x", c.n_x);
    take(j, "scheme", c.scheme);
    take(j, "dt", c.dt);
    take(j, "t_max", c.t_max);
    take(j, "snapshots", c.snapshots);
    take(j, "cutoff_radius", c.cutoff_radius);
    take(j, "cutoff_strength", c.cutoff_strength);
    take(j, "delta", c.delta);
    take(j, "weight", c.weight);
    take(j, "D", c.D);
    take(j, "alpha_weight", c.alpha_weight);
    take(j, "delta_weight", c.delta_weight);
    take(j, "M", c.M);
    take(j, "initial", c.initial);
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "out", c.out);
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RunConfig::to_json() const {
    // out and threads do not change results and stay out of the hash
    json j = {{"gamma", gamma},
              {"dim", dim},
              {"v_max", v_max},
              {"n_v", n_v},
              {"h_v", h_v},
              {"l_x", l_x},
              {"n_x", n_x},
              {"scheme", scheme},
              {"dt", dt},
              {"t_max", t_max},
              {"snapshots", snapshots},
              {"cutoff_radius", cutoff_radius},
              {"cutoff_strength", cutoff_strength},
              {"delta", delta},
              {"weight", weight},
              {"D", D},
              {"alpha_weight", alpha_weight},
              {"delta_weight", delta_weight},
              {"M", M},
              {"initial", initial},
              {"seed", seed}};
    return j.dump();
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json())));
    return buf;
}

PotentialParams RunConfig::potential() const {
    PotentialParams p;
    p.gamma = gamma;
    p.cutoff_radius = cutoff_radius;
    p.cutoff_strength = cutoff_strength;
    p.longwave_delta = delta;
    p.dim_v = dim;
    return p;
}

WeightParams RunConfig::weight_params() const {
    WeightParams w;
    w.kind = parse_weight_kind(weight);
    w.D = D;
    w.alpha_weight = alpha_weight;
    w.delta_weight = delta_weight;
    w.M = M > 0.0 ? M : 1.0;
    return w;
}

Scheme RunConfig::scheme_value() const { return parse_scheme(scheme, dt); }

std::vector<double> RunConfig::snapshot_times() const {
    if (!snapshots.empty()) return snapshots;
    std::vector<double> t;
    for (int k = 0; k <= static_cast<int>(std::floor(t_max + 1e-9)); ++k) t.push_back(k);
    return t;
}

void RunConfig::validate() const {
    potential().validate();
    if (dim < 1 || dim > 3) throw ConfigError("dim must be 1, 2 or 3");
    if (!(h_v > 0.0)) throw ConfigError("h_v must be positive");
    if (v_max < 0.0) throw ConfigError("v_max must be nonnegative");
    if (n_v != 0 && n_v % 2 == 0) throw ConfigError("n_v must be odd so that v=0 is a node");
    if (n_v != 0 && !(v_max > 0.0)) throw ConfigError("n_v needs an explicit v_max");
    if (n_v != 0) build_grid(v_max, n_v, dim);
    build_space_grid(l_x, n_x, dim);
    const Scheme s = scheme_value();
    if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
    const auto ts = snapshot_times();
    for (size_t k = 0; k < ts.size(); ++k) {
        if (ts[k] < 0.0 || ts[k] > t_max + 1e-12) throw ConfigError("snapshot times must lie in [0, t_max]");
        if (k > 0 && !(ts[k] > ts[k - 1])) throw ConfigError("snapshot times must be strictly increasing");
        if (s.kind != Scheme::Kind::Exact) {
            const double r = ts[k] / s.dt;
            if (std::abs(r - std::round(r)) > 1e-8 * std::max(1.0, r))
                throw ConfigError("snapshot time " + std::to_string(ts[k]) + " is not a multiple of dt");
        }
    }
    if (delta < 0.0) throw ConfigError("delta must be nonnegative");
    if (M < 0.0) throw ConfigError("M must be nonnegative");
    weight_params().validate(gamma);
    if (initial != "fluid_bump" && initial != "micro_bump" && initial != "white_noise" && initial != "bump_exact")
        throw ConfigError("initial must be fluid_bump, micro_bump, white_noise or bump_exact");
    if (threads < 1) throw ConfigError("threads must be at least 1");
}

} // namespace kfp
