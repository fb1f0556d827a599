#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "potrec/errors.hpp"
#include "potrec/experiments.hpp"
#include "potrec/kernels.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, assertion_failed = 1, config_error = 2, numerical_failure = 3 };

fs::path output_dir(const potrec::ExperimentConfig& c, const std::string& flag) {
    if (!flag.empty()) return flag;
    if (!c.output_dir.empty()) return c.output_dir;
    const char* root = std::getenv("POTREC_OUTPUT_ROOT");
    return fs::path(root && *root ? root : "potrec_out") / c.name;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Potential recovery from boundary measurements"};
    app.require_subcommand(1);
    std::string out, config, manifest;
    int threads = 0;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run an experiment and write its artifacts and manifest");
    run->add_option("config", config, "experiment config (JSON)")->required();
    run->add_option("--out", out, "output directory (default: $POTREC_OUTPUT_ROOT/<name>)");
    run->add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    run->add_option("--seed-override", seed, "replace the config seed");

    auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
    validate->add_option("config", config, "experiment config (JSON)")->required();
    validate->add_option("--seed-override", seed, "replace the config seed");

    auto* plot = app.add_subcommand("plot", "write plot-ready tables next to a run's manifest");
    plot->add_option("manifest", manifest, "manifest.json of a finished run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    try {
        if (*plot) {
            for (const auto& p : potrec::emit_plot_data(manifest)) std::cout << p.string() << '\n';
            return ok;
        }
        potrec::ExperimentConfig cfg = potrec::load_config(config);
        if (seed) {
            cfg.seed = *seed;
            cfg.potential.rough.seed = *seed;
        }
        if (*validate) {
            std::cout << potrec::to_json(cfg).dump(2) << '\n';
            return ok;
        }
        if (threads > 0) potrec::kernels::set_threads(threads);
        const fs::path dir = output_dir(cfg, out);
        const potrec::RunOutcome res = potrec::run_experiment(cfg, dir);
        std::cout << "manifest: " << res.manifest_path.string() << '\n';
        for (const auto& a : res.manifest["assertions"])
            std::cout << (a["passed"].get<bool>() ? "PASS " : "FAIL ") << a["check"].get<std::string>() << '\n';
        return res.passed ? ok : assertion_failed;
    } catch (const potrec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return config_error;
    } catch (const potrec::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical_failure;
    }
}
