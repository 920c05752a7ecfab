#pragma once

#include <iosfwd>
#include <string>

#include "vlfsig/checkpoint.hpp"
#include "vlfsig/dataset_io.hpp"
#include "vlfsig/runconfig.hpp"
#include "vlfsig/train.hpp"

namespace vlfsig::commands {

// Writes the generator output as binary (or CSV when csv is set).
void generate(const RunConfig& cfg, const std::string& out_path, bool csv, bool force);

// Applies the preprocessing chain per record and writes the same format.
void preprocess(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                bool force);

struct TrainOutcome {
    train::TrainResult result;
    train::EvalReport report;  // on the training dataset, trajectory included
};
// Trains cfg.model_kind on the dataset, writes the checkpoint, a JSON report
// and a loss-curve CSV next to it.
TrainOutcome train_command(const RunConfig& cfg, const std::string& dataset_path,
                           const std::string& checkpoint_path, const std::string& report_path,
                           bool force, std::ostream& log);

struct EvalOptions {
    std::string checkpoint_path;  // unused in k-fold mode
    std::string dataset_path;
    std::string out_dir = ".";
    int kfold = 0;  // 0 = evaluate the checkpoint; >0 = cross-validate from config
    bool heatmaps = false;
    int heatmap_window = 100;
    int heatmap_stride = 50;
    bool histograms = false;
    int histogram_bins = 30;
    bool render_svg = false;
    bool force = false;
};
// Plain mode: confusion/F1/ROC report for a checkpoint. K-fold mode: trains
// one model per fold from `kfold_config` and emits one report per fold plus
// a summary grid.
void eval_command(const EvalOptions& opts, const RunConfig* kfold_config, std::ostream& log);

// CSV -> SVG polyline rendering ('#' comment lines skipped).
void plot(const std::string& csv_path, const std::string& svg_path, bool force);

// Report serialization (shared with the acceptance tests).
std::string report_json(const train::EvalReport& report, const RunConfig& cfg);
void write_report_json(const std::string& path, const train::EvalReport& report,
                       const RunConfig& cfg, bool force);

}  // namespace vlfsig::commands
