#include <CLI11.hpp>
#include <iostream>

#include "dml/config.hpp"
#include "dml/errors.hpp"
#include "dml/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    double level = -1.0;
    double draws = -1.0;
    double seed = -1.0;
    double threads = -1.0;
    std::string csv;
    std::string sided;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file; flags override file values");
    cmd->add_option("--set", flags.sets, "dotted-path override, e.g. --set nuisance.folds=10");
    cmd->add_option("--out", flags.out, "report output path");
    cmd->add_option("--level", flags.level, "confidence level 1-alpha");
    cmd->add_option("--draws", flags.draws, "Gaussian-max draws for the critical value");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--threads", flags.threads, "worker count (results do not depend on it)");
    cmd->add_option("--csv", flags.csv, "input CSV path (shorthand for data.csv)");
    cmd->add_option("--sided", flags.sided, "two_sided or one_sided");
}

std::vector<std::pair<std::string, std::string>> collect_overrides(const CommonFlags& flags,
                                                                   const std::string& command) {
    std::vector<std::pair<std::string, std::string>> overrides;
    overrides.emplace_back("command", command);
    for (const auto& pair : flags.sets) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw dml::ConfigError("--set expects key=value, got \"" + pair + "\"");
        overrides.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
    }
    if (!flags.out.empty()) overrides.emplace_back("out", flags.out);
    if (flags.level >= 0.0) overrides.emplace_back("level", std::to_string(flags.level));
    if (flags.draws >= 0.0) overrides.emplace_back("draws", std::to_string(flags.draws));
    if (flags.seed >= 0.0) overrides.emplace_back("seed", std::to_string(flags.seed));
    if (flags.threads >= 0.0) overrides.emplace_back("threads", std::to_string(flags.threads));
    if (!flags.csv.empty()) overrides.emplace_back("data.csv", flags.csv);
    if (!flags.sided.empty()) overrides.emplace_back("sided", flags.sided);
    return overrides;
}

int run_command(const CommonFlags& flags, const std::string& command,
                const std::vector<std::pair<std::string, std::string>>& extra) {
    auto overrides = collect_overrides(flags, command);
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    const dml::RunConfig config =
        flags.config_path.empty()
            ? dml::parse_config_text("{}", overrides)
            : dml::parse_config_file(flags.config_path, overrides);
    const dml::Report report = dml::run(config);
    std::cout << dml::summarize(report) << "\n";
    if (!config.doc.contains("out")) std::cout << report.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-dimensional debiased ML inference: simultaneous bands, "
                 "finite-sample bound calculators, Monte Carlo harness"};
    app.require_subcommand(1);

    CommonFlags estimate_flags, bands_flags, cdf_flags, bound_flags, simulate_flags;
    auto* cmd_estimate = app.add_subcommand("estimate", "point estimates and standard errors");
    add_common(cmd_estimate, estimate_flags);
    auto* cmd_bands = app.add_subcommand("bands", "simultaneous sup-t confidence bands");
    add_common(cmd_bands, bands_flags);
    auto* cmd_cdf = app.add_subcommand("cdf-bands", "counterfactual-CDF bands and QTE");
    add_common(cmd_cdf, cdf_flags);
    auto* cmd_bound = app.add_subcommand("bound", "finite-sample bound calculators");
    add_common(cmd_bound, bound_flags);
    double bound_theorem = 1;
    std::string bound_regime;
    cmd_bound->add_option("--theorem", bound_theorem, "1 or 2");
    cmd_bound->add_option("--regime", bound_regime, "heavy, subgauss, or bounded");
    auto* cmd_simulate = app.add_subcommand("simulate", "replicated experiments");
    add_common(cmd_simulate, simulate_flags);
    std::string simulate_mode;
    cmd_simulate->add_option("--mode", simulate_mode, "coverage, ks, or decomposition_audit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_estimate->parsed()) return run_command(estimate_flags, "estimate", {});
        if (cmd_bands->parsed()) return run_command(bands_flags, "bands", {});
        if (cmd_cdf->parsed()) return run_command(cdf_flags, "cdf-bands", {});
        if (cmd_bound->parsed()) {
            std::vector<std::pair<std::string, std::string>> extra;
            extra.emplace_back("bound.theorem", std::to_string(bound_theorem));
            if (!bound_regime.empty()) extra.emplace_back("bound.regime", bound_regime);
            return run_command(bound_flags, "bound", extra);
        }
        if (cmd_simulate->parsed()) {
            std::vector<std::pair<std::string, std::string>> extra;
            if (!simulate_mode.empty()) extra.emplace_back("simulate.mode", simulate_mode);
            return run_command(simulate_flags, "simulate", extra);
        }
    } catch (const dml::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dml::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
