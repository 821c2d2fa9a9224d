#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kfp/config.hpp"
#include "kfp/decompose.hpp"
#include "kfp/rates.hpp"

namespace kfp {

// A checked property did not hold (exit code 1).
class InvariantFailure : public Error {
public:
    using Error::Error;
};

OperatorSet build_ops(const RunConfig& c);
SpaceGrid build_sgrid(const RunConfig& c);
ModeSet initial_modes(const RunConfig& c, const OperatorSet& ops, const SpaceGrid& sg);
double resolve_delta(const RunConfig& c, const OperatorSet& ops);

// Evolves m0 and hands each snapshot to `sink` in time order. Snapshots are
// produced in chunks so that long runs on large grids stay within memory.
void stream_evolution(const OperatorSet& ops, const ModeSet& m0, const std::vector<double>& times,
                      const Scheme& scheme, const EvolveOptions& opt, const std::function<void(const ModeSet&)>& sink,
                      EvolveReport* report = nullptr, double budget_bytes = 4e8);

struct Check {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::string note;
};

std::vector<Check> operator_checks(const RunConfig& c);

// Relative Richardson estimate |f_dt - f_{dt/2}| / |f| of one stepping scheme
// on the run data at time t (0 for the exact scheme).
double scheme_tolerance(const OperatorSet& ops, const ModeSet& m0, const Scheme& s, double t, int threads = 1);

struct RunOptions {
    std::string out_dir;
    int threads = 1;
    bool force = false;
    bool dump_ops = false;
};

// Each returns the process exit code: 0 pass, 1 invariant failure.
// ConfigError escapes for exit code 2.
int cmd_check_operator(const RunConfig& c, const RunOptions& o);
int cmd_spectrum(const RunConfig& c, const RunOptions& o);
int cmd_evolve(const RunConfig& c, const RunOptions& o);
int cmd_decompose(const RunConfig& c, const RunOptions& o);
int cmd_probe_regularization(const RunConfig& c, const RunOptions& o);
int cmd_rates(const RunConfig& c, const RunOptions& o);
int cmd_report(const RunConfig& c, const RunOptions& o);
int cmd_all(const RunConfig& c, const RunOptions& o);

void dump_ops(const RunConfig& c, const RunOptions& o);

} // namespace kfp
