// Command-line front end: generate | preprocess | train | eval | plot.
// Exit codes: 0 success, 1 validation error, 2 I/O or parse error.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "vlfsig/commands.hpp"

namespace {

vlfsig::RunConfig resolve_config(const std::string& config_path,
                                 const std::optional<std::uint64_t>& seed) {
    vlfsig::RunConfig cfg;
    if (!config_path.empty()) cfg = vlfsig::load_run_config(config_path);
    if (seed) cfg.override_seed(*seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VLF lightning transient classification toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool force = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "override every seed in the configuration");
    app.add_flag("--force", force, "overwrite existing output files");

    auto* gen = app.add_subcommand("generate", "write a synthetic labeled dataset");
    std::string gen_out;
    bool gen_csv = false;
    gen->add_option("--out", gen_out, "output dataset path")->required();
    gen->add_flag("--csv", gen_csv, "write CSV instead of the binary format");

    auto* pre = app.add_subcommand("preprocess", "DC removal, low-pass, notch comb per record");
    std::string pre_in, pre_out;
    pre->add_option("--in", pre_in, "input dataset")->required();
    pre->add_option("--out", pre_out, "output dataset")->required();

    auto* tr = app.add_subcommand("train", "train a classifier and write a checkpoint");
    std::string tr_data, tr_ckpt, tr_report, tr_model;
    tr->add_option("--data", tr_data, "training dataset")->required();
    tr->add_option("--out", tr_ckpt, "output checkpoint path")->required();
    tr->add_option("--report", tr_report, "output report JSON path");
    tr->add_option("--model", tr_model, "model kind: msrt or baseline");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or run k-fold cross-validation");
    vlfsig::commands::EvalOptions eopts;
    ev->add_option("--checkpoint", eopts.checkpoint_path, "model checkpoint");
    ev->add_option("--data", eopts.dataset_path, "evaluation dataset")->required();
    ev->add_option("--out-dir", eopts.out_dir, "directory for reports and CSV files");
    ev->add_option("--kfold", eopts.kfold, "train/evaluate k folds from --config");
    ev->add_flag("--heatmaps", eopts.heatmaps, "export per-class correlation heatmap CSVs");
    ev->add_option("--heatmap-window", eopts.heatmap_window, "heatmap window length");
    ev->add_option("--heatmap-stride", eopts.heatmap_stride, "heatmap window stride");
    ev->add_flag("--histograms", eopts.histograms, "export per-level feature histogram CSV");
    ev->add_option("--histogram-bins", eopts.histogram_bins, "feature histogram bin count");
    ev->add_flag("--svg", eopts.render_svg, "also render ROC CSVs as SVG");

    auto* pl = app.add_subcommand("plot", "render a CSV curve file as SVG");
    std::string plot_in, plot_out;
    pl->add_option("--in", plot_in, "input CSV")->required();
    pl->add_option("--out", plot_out, "output SVG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            vlfsig::commands::generate(resolve_config(config_path, seed), gen_out, gen_csv, force);
        } else if (pre->parsed()) {
            vlfsig::commands::preprocess(resolve_config(config_path, seed), pre_in, pre_out,
                                         force);
        } else if (tr->parsed()) {
            auto cfg = resolve_config(config_path, seed);
            if (!tr_model.empty()) cfg.model_kind = tr_model;
            const std::string report =
                tr_report.empty() ? tr_ckpt + ".report.json" : tr_report;
            vlfsig::commands::train_command(cfg, tr_data, tr_ckpt, report, force, std::cout);
        } else if (ev->parsed()) {
            eopts.force = force;
            std::optional<vlfsig::RunConfig> cfg;
            if (!config_path.empty() || eopts.kfold > 0)
                cfg = resolve_config(config_path, seed);
            vlfsig::commands::eval_command(eopts, cfg ? &*cfg : nullptr, std::cout);
        } else if (pl->parsed()) {
            vlfsig::commands::plot(plot_in, plot_out, force);
        }
    } catch (const vlfsig::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vlfsig::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
