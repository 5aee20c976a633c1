// synthkit command-line driver.
//
// Subcommands: detect, patch, filter, sweep, eval, report. Every run is driven
// by a config file plus flag overrides (flags win). Exit codes: 0 success,
// 1 detection-positive, 2 input/config error, 3 non-convergence/infeasible,
// 4 internal error.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthkit/pipeline.hpp"

namespace {

struct Overrides {
    std::vector<std::pair<std::string, std::string>> settings;

    void add(const std::string& key, const std::string& value) { settings.emplace_back(key, value); }
};

void add_common_options(CLI::App* cmd, std::string& config_path, Overrides& overrides) {
    cmd->add_option("-c,--config", config_path, "Config file (INI-style sections)");
    auto bind = [cmd, &overrides](const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [&overrides, key](const std::string& value) { overrides.add(key, value); }, help);
    };
    bind("--real", "paths.real", "Real data CSV");
    bind("--synthetic", "paths.synthetic", "Synthetic data CSV");
    bind("--schema", "paths.schema", "Schema file");
    bind("--out", "paths.output", "Output directory");
    bind("--report-file", "paths.report", "Existing report.json (report subcommand)");
    bind("--generator", "generator.kind", "Generator kind: independent_marginals | bootstrap_jitter");
    bind("--sigma", "generator.sigma", "Bootstrap jitter sigma");
    bind("--generator-fit", "generator.fit", "CSV the generator is fitted on (defaults to real train slice)");
    bind("--tau", "filter.taus", "Single tau (overrides the grid)");
    bind("--taus", "filter.taus", "Comma-separated tau grid");
    bind("--variant", "filter.variant", "Filter variant: v0 | v1 | v2 | custom");
    bind("--weighting", "filter.weighting", "Custom variant weighting: unweighted | entropy");
    bind("--k", "filter.k", "Custom variant kNN radius order");
    bind("--sample-size", "filter.sample_size", "Synthetic sample size n");
    bind("--max-proposals", "filter.max_proposals", "Proposal budget (0 = 100*n)");
    bind("--include-baseline", "filter.include_baseline", "Include unfiltered baseline cell in sweeps");
    bind("--batch", "patch.batch", "Mode-patch batch size B");
    bind("--patch-m", "patch.m", "Mode-patch per-level budget m");
    bind("--max-rounds", "patch.max_rounds", "Mode-patch round limit");
    bind("--fidelity", "metrics.fidelity", "Enable/disable fidelity metrics (true/false)");
    bind("--utility", "metrics.utility", "Enable/disable utility metrics (true/false)");
    bind("--privacy", "metrics.privacy", "Enable/disable privacy metrics (true/false)");
    bind("--quasi-identifiers", "columns.quasi_identifiers", "Comma-separated quasi-identifier columns");
    bind("--sensitive", "columns.sensitive", "Comma-separated sensitive columns");
    bind("--split-fraction", "protocol.split_fraction", "Real train fraction");
    bind("--seed", "protocol.seed", "Master seed");
    bind("--q-low", "protocol.q_low", "Lower quantile for tail heuristics");
    bind("--q-high", "protocol.q_high", "Upper quantile for tail heuristics");
    bind("--rbo-p", "protocol.rbo_p", "RBO persistence parameter");
    bind("--pfi-permutations", "protocol.pfi_permutations", "Permutations per feature for PFI");
    bind("--pfi-metric", "protocol.pfi_metric", "PFI metric");
    bind("--knn-k", "protocol.knn_k", "k of the kNN reference learner");
    bind("--density-k", "protocol.density_k", "k of the local-density proxy");
}

synthkit::PipelineConfig resolve_config(const std::string& config_path, const Overrides& overrides) {
    synthkit::PipelineConfig cfg;
    if (!config_path.empty()) cfg = synthkit::load_config(config_path);
    for (const auto& [key, value] : overrides.settings) synthkit::apply_setting(cfg, key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-processing and evaluation toolkit for synthetic tabular data"};
    app.require_subcommand(1);

    struct Sub {
        CLI::App* cmd;
        std::string config_path;
        Overrides overrides;
        int (*run)(const synthkit::PipelineConfig&, std::ostream&);
    };
    std::vector<Sub> subs;
    auto register_cmd = [&](const std::string& name, const std::string& help,
                            int (*run)(const synthkit::PipelineConfig&, std::ostream&)) {
        subs.push_back(Sub{app.add_subcommand(name, help), "", {}, run});
        add_common_options(subs.back().cmd, subs.back().config_path, subs.back().overrides);
    };
    subs.reserve(6);
    register_cmd("detect", "Detect categorical levels missing from the synthetic data", synthkit::cmd_detect);
    register_cmd("patch", "Repair missing categorical levels via the iterative patch loop", synthkit::cmd_patch);
    register_cmd("filter", "Run the rejection-with-replacement privacy filter once", synthkit::cmd_filter);
    register_cmd("sweep", "Filter across a tau grid and score every cell", synthkit::cmd_sweep);
    register_cmd("eval", "Score a fixed (real, synthetic) pair", synthkit::cmd_eval);
    register_cmd("report", "Re-emit CSV summaries from an existing report.json", synthkit::cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    for (const auto& sub : subs) {
        if (!sub.cmd->parsed()) continue;
        try {
            const auto cfg = resolve_config(sub.config_path, sub.overrides);
            return sub.run(cfg, std::cout);
        } catch (const synthkit::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return synthkit::exit_code_for(e);
        } catch (const std::exception& e) {
            std::cerr << "internal error: " << e.what() << "\n";
            return 4;
        }
    }
    return 2;
}
