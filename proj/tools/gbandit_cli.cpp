// gbandit: command-line driver for the gossip bandit experiments.
//
//   gbandit run            --config exp.cfg [--out dir] [--seed N] [--workers N]
//   gbandit sweep-alpha    ...
//   gbandit sweep-delta    ...
//   gbandit sweep-topology ...
//   gbandit constants      --config exp.cfg [--out dir]

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <thread>

#include "gbandit/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_workers) {
    cmd->add_option("--config", flags.config_path, "Experiment config (key = value lines)");
    cmd->add_option("--out", flags.out, "Output directory (overrides 'out')");
    cmd->add_option("--seed", flags.seed, "Master seed (overrides 'seed')");
    if (with_workers)
        cmd->add_option("--workers", flags.workers, "Worker threads; output does not depend on it")
            ->check(CLI::PositiveNumber);
}

gbandit::ExperimentConfig resolve(const CommonFlags& flags) {
    gbandit::ExperimentConfig cfg;
    if (!flags.config_path.empty()) cfg = gbandit::load_config(flags.config_path);
    if (flags.out) cfg.out = *flags.out;
    if (flags.seed) cfg.seed = *flags.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized gossip multi-armed bandit simulator"};
    app.require_subcommand(1);

    CommonFlags flags;
    const std::pair<const char*, gbandit::ExperimentMode> experiments[] = {
        {"run", gbandit::ExperimentMode::Run},
        {"sweep-alpha", gbandit::ExperimentMode::SweepAlpha},
        {"sweep-delta", gbandit::ExperimentMode::SweepDelta},
        {"sweep-topology", gbandit::ExperimentMode::SweepTopology},
    };
    std::optional<gbandit::ExperimentMode> chosen;
    for (const auto& [name, mode] : experiments) {
        auto* cmd = app.add_subcommand(name, std::string("Run the '") + name + "' experiment");
        add_common(cmd, flags, true);
        cmd->callback([&chosen, mode = mode] { chosen = mode; });
    }
    auto* constants = app.add_subcommand("constants", "Write Lai-Robbins and per-agent asymptotic constants");
    add_common(constants, flags, false);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve(flags);
        if (chosen) {
            const auto results = gbandit::run_experiment(cfg, *chosen, flags.workers);
            std::fprintf(stderr, "wrote %zu series x %zu runs to %s\n", results.size(), cfg.runs, cfg.out.c_str());
        } else {
            gbandit::emit_reference_constants(cfg);
            std::fprintf(stderr, "wrote %s/constants.csv\n", cfg.out.c_str());
        }
    } catch (const gbandit::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
