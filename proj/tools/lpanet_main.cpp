// lpanet command line: latent profile analysis, profile description,
// relative importance and per-profile partial-correlation networks driven by
// a single JSON config.
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lpanet/errors.hpp"
#include "lpanet/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Path to the JSON run config")->required();
    cmd->add_option("--seed", opts.seed, "Override the config seed");
    cmd->add_option("--output-dir", opts.output_dir, "Override the config output directory");
    cmd->add_option("--threads", opts.threads, "Worker threads for sweeps and bootstraps");
}

lpanet::PipelineConfig resolve_config(const CommonOpts& opts) {
    lpanet::PipelineConfig cfg = lpanet::load_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.output_dir) cfg.output_dir = *opts.output_dir;
    if (opts.threads) cfg.threads = *opts.threads;
    cfg.validate();
    return cfg;
}

int exit_code_for(const lpanet::Error& e) {
    switch (e.kind()) {
        case lpanet::ErrorKind::Config: return 2;
        case lpanet::ErrorKind::Data: return 3;
        case lpanet::ErrorKind::Numeric: return 4;
    }
    return 4;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return 0;
    } catch (const lpanet::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}

void run_stage_with_manifest(const lpanet::PipelineConfig& cfg, const std::string& stage_name,
                             const std::function<std::size_t(std::vector<std::string>&)>& body) {
    std::vector<std::string> files;
    try {
        const std::size_t dropped = body(files);
        lpanet::write_manifest(cfg, files, dropped, "ok", "", "");
    } catch (const lpanet::Error& e) {
        lpanet::write_manifest(cfg, files, 0, "FAILED", stage_name, e.what());
        throw lpanet::Error(e.kind(), "[stage " + stage_name + "] " + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent profile analysis and network pipeline"};
    app.require_subcommand(1);

    CommonOpts fit_opts, desc_opts, imp_opts, net_opts, all_opts;
    CLI::App* fit = app.add_subcommand("fit-lpa", "Model sweep, selection and classification");
    add_common(fit, fit_opts);
    CLI::App* desc = app.add_subcommand("describe", "Profile description and correlations");
    add_common(desc, desc_opts);
    CLI::App* imp = app.add_subcommand("importance", "Relative importance decomposition");
    add_common(imp, imp_opts);
    CLI::App* net = app.add_subcommand("network", "Per-profile networks and centralities");
    add_common(net, net_opts);
    CLI::App* all = app.add_subcommand("run-all", "Full pipeline end to end");
    add_common(all, all_opts);

    std::string synth_out = "synthetic.csv";
    std::uint64_t synth_seed = 1;
    std::size_t synth_n = 1000;
    CLI::App* synth = app.add_subcommand("synth", "Write the bundled synthetic demo dataset");
    synth->add_option("--out", synth_out, "Output CSV path");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--n", synth_n, "Number of rows");

    CLI11_PARSE(app, argc, argv);

    if (fit->parsed())
        return guarded([&] {
            const auto cfg = resolve_config(fit_opts);
            run_stage_with_manifest(cfg, "fit-lpa", [&](std::vector<std::string>& files) {
                return lpanet::stage_fit_lpa(cfg, files).dropped_rows;
            });
        });
    if (desc->parsed())
        return guarded([&] {
            const auto cfg = resolve_config(desc_opts);
            run_stage_with_manifest(cfg, "describe", [&](std::vector<std::string>& files) {
                return lpanet::stage_describe(cfg, files).dropped_rows;
            });
        });
    if (imp->parsed())
        return guarded([&] {
            const auto cfg = resolve_config(imp_opts);
            run_stage_with_manifest(cfg, "importance", [&](std::vector<std::string>& files) {
                return lpanet::stage_importance(cfg, files).dropped_rows;
            });
        });
    if (net->parsed())
        return guarded([&] {
            const auto cfg = resolve_config(net_opts);
            run_stage_with_manifest(cfg, "network", [&](std::vector<std::string>& files) {
                return lpanet::stage_network(cfg, files).dropped_rows;
            });
        });
    if (all->parsed())
        return guarded([&] {
            const auto cfg = resolve_config(all_opts);
            lpanet::run_pipeline(cfg);
        });
    if (synth->parsed())
        return guarded([&] { lpanet::write_demo_dataset(synth_out, synth_n, synth_seed); });
    return 0;
}
