#include <cstdio>
#include <functional>
#include <map>

#include <CLI11.hpp>

#include "kfp/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Kinetic Fokker-Planck experiment driver"};
    app.set_version_flag("--version", kfp::kVersion);
    app.require_subcommand(1, 1);

    std::string config_path;
    kfp::RunOptions opt;
    int threads = 0;
    app.add_option("--config", config_path, "flat JSON run configuration");
    app.add_option("--out", opt.out_dir, "run directory (default: config key out)");
    app.add_option("--threads", threads, "worker threads (default: config key threads)")->check(CLI::PositiveNumber);
    app.add_flag("--force", opt.force, "overwrite existing outputs");
    app.add_flag("--dump-ops", opt.dump_ops, "write the discrete operators to ops.json");

    const std::map<std::string, std::function<int(const kfp::RunConfig&, const kfp::RunOptions&)>> cmds = {
        {"check-operator", kfp::cmd_check_operator},
        {"spectrum", kfp::cmd_spectrum},
        {"evolve", kfp::cmd_evolve},
        {"decompose", kfp::cmd_decompose},
        {"probe-regularization", kfp::cmd_probe_regularization},
        {"rates", kfp::cmd_rates},
        {"report", kfp::cmd_report},
        {"all", kfp::cmd_all},
    };
    for (const auto& [name, fn] : cmds) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        kfp::RunConfig cfg = config_path.empty() ? kfp::RunConfig{} : kfp::RunConfig::from_file(config_path);
        if (threads > 0) cfg.threads = threads;
        opt.threads = cfg.threads;
        cfg.validate();
        if (opt.dump_ops) kfp::dump_ops(cfg, opt);
        const std::string name = app.get_subcommands().front()->get_name();
        const int code = cmds.at(name)(cfg, opt);
        std::printf("%s: %s\n", name.c_str(), code == 0 ? "pass" : "FAIL");
        return code;
    } catch (const kfp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const kfp::InvariantFailure& e) {
        std::fprintf(stderr, "invariant failure: %s\n", e.what());
        return 1;
    } catch (const kfp::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
