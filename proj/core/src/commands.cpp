#include "vlfsig/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "svg.hpp"
#include "vlfsig/dsp.hpp"

namespace vlfsig::commands {

using nlohmann::json;

namespace {

void check_writable(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path))
        throw IoError("output path '" + path + "' exists; pass --force to overwrite");
}

std::ofstream open_out(const std::string& path, bool force) {
    check_writable(path, force);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

// Single-line config comment so every CSV carries its provenance.
void write_config_comment(std::ofstream& out, const RunConfig& cfg) {
    out << "# config: " << json::parse(run_config_json(cfg)).dump() << "\n";
}

datagen::Dataset read_any_dataset(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_dataset_csv(path);
    return read_dataset(path);
}

void write_any_dataset(const std::string& path, const datagen::Dataset& data, bool force) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        write_dataset_csv(path, data, force);
    else
        write_dataset(path, data, force);
}

json confusion_to_json(const train::ConfusionMatrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.n_classes(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.n_classes(); ++j) row.push_back(m.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

void write_roc_csvs(const std::string& out_dir, const train::EvalReport& report,
                    const RunConfig& cfg, bool force, bool render_svg) {
    for (std::size_t c = 0; c < report.roc_per_class.size(); ++c) {
        const auto& roc = report.roc_per_class[c];
        if (roc.points.empty()) continue;
        const std::string path = out_dir + "/roc_class" + std::to_string(c) + ".csv";
        auto out = open_out(path, force);
        write_config_comment(out, cfg);
        out << "fpr,tpr\n";
        out.precision(12);
        for (const auto& [fpr, tpr] : roc.points) out << fpr << ',' << tpr << "\n";
        out.close();
        if (render_svg) plot(path, path.substr(0, path.size() - 4) + ".svg", force);
    }
}

}  // namespace

std::string report_json(const train::EvalReport& report, const RunConfig& cfg) {
    json j;
    j["config"] = json::parse(run_config_json(cfg));
    j["class_names"] = datagen::kClassNames;
    j["confusion"] = confusion_to_json(report.confusion);
    json per_class = json::array();
    for (std::size_t c = 0; c < report.f1.per_class.size(); ++c) {
        const auto& s = report.f1.per_class[c];
        per_class.push_back({{"class", datagen::kClassNames[c]},
                             {"precision", s.precision},
                             {"recall", s.recall},
                             {"f1", s.f1},
                             {"degenerate", s.degenerate}});
    }
    j["per_class"] = per_class;
    j["macro_f1"] = report.f1.macro_f1;
    j["accuracy"] = report.accuracy;
    j["epoch_average_f1"] = report.epoch_avg_f1;
    j["auc_per_class"] = report.auc_per_class;
    json traj = json::array();
    for (const auto& e : report.trajectory)
        traj.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}, {"macro_f1", e.macro_f1}});
    j["trajectory"] = traj;
    return j.dump(2);
}

void write_report_json(const std::string& path, const train::EvalReport& report,
                       const RunConfig& cfg, bool force) {
    auto out = open_out(path, force);
    out << report_json(report, cfg) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

void generate(const RunConfig& cfg, const std::string& out_path, bool csv, bool force) {
    cfg.validate();
    const auto data =
        datagen::gen_dataset(cfg.generate.per_class, cfg.generate.seed, cfg.model.input_len);
    if (csv)
        write_dataset_csv(out_path, data, force);
    else
        write_dataset(out_path, data, force);
}

void preprocess(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                bool force) {
    cfg.filter.validate();
    datagen::Dataset data = read_any_dataset(in_path);
    for (auto& rec : data) rec.samples = dsp::preprocess(rec.samples, cfg.filter);
    write_any_dataset(out_path, data, force);
}

TrainOutcome train_command(const RunConfig& cfg, const std::string& dataset_path,
                           const std::string& checkpoint_path, const std::string& report_path,
                           bool force, std::ostream& log) {
    cfg.validate();
    check_writable(checkpoint_path, force);
    const datagen::Dataset data = read_any_dataset(dataset_path);
    if (data.empty()) throw ConfigError("training dataset '" + dataset_path + "' is empty");
    if (static_cast<int>(data[0].samples.size()) != cfg.model.input_len)
        throw ConfigError("dataset record length " + std::to_string(data[0].samples.size()) +
                          " does not match model input_len " + std::to_string(cfg.model.input_len));

    auto model = make_classifier(cfg.model, cfg.model_kind);
    TrainOutcome outcome;
    outcome.result = train::train(*model, data, cfg.train, &log);
    outcome.report = train::evaluate(*model, data);
    outcome.report.trajectory = outcome.result.epochs;
    const auto f1s = outcome.result.per_epoch_f1();
    outcome.report.epoch_avg_f1 = train::epoch_average_f1(f1s);

    save_checkpoint(checkpoint_path, *model, cfg, force);
    if (!report_path.empty()) {
        write_report_json(report_path, outcome.report, cfg, force);
        const std::string curve_path =
            report_path.substr(0, report_path.find_last_of('.')) + "_curve.csv";
        auto out = open_out(curve_path, force);
        write_config_comment(out, cfg);
        out << "epoch,loss,accuracy,macro_f1\n";
        out.precision(12);
        for (std::size_t e = 0; e < outcome.result.epochs.size(); ++e)
            out << (e + 1) << ',' << outcome.result.epochs[e].loss << ','
                << outcome.result.epochs[e].accuracy << ',' << outcome.result.epochs[e].macro_f1
                << "\n";
    }
    return outcome;
}

namespace {

void export_heatmaps(const datagen::Dataset& data, const EvalOptions& opts, const RunConfig& cfg) {
    // One heatmap per class, first record of each.
    std::array<bool, datagen::kNumClasses> done{};
    for (const auto& rec : data) {
        if (rec.label < 0 || rec.label >= datagen::kNumClasses) continue;
        if (done[static_cast<std::size_t>(rec.label)]) continue;
        done[static_cast<std::size_t>(rec.label)] = true;
        const auto m =
            dsp::correlation_heatmap(rec.samples, opts.heatmap_window, opts.heatmap_stride);
        auto out = open_out(opts.out_dir + "/heatmap_class" + std::to_string(rec.label) + ".csv",
                            opts.force);
        write_config_comment(out, cfg);
        out.precision(9);
        for (const auto& row : m) {
            for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
            out << "\n";
        }
    }
}

void export_histograms(const Classifier& model, const datagen::Dataset& data,
                       const EvalOptions& opts, const RunConfig& cfg) {
    const auto* msrt = dynamic_cast<const MsrtModel*>(&model);
    if (!msrt) throw ConfigError("feature histograms require an msrt checkpoint");
    const auto& rec = data.front();
    Graph g(false);
    Tensor x = Tensor::from_values({1, static_cast<int>(rec.samples.size())}, rec.samples);
    const auto pyramid = msrt->fpn_features(g, msrt->backbone_features(g, x));
    auto out = open_out(opts.out_dir + "/feature_histograms.csv", opts.force);
    write_config_comment(out, cfg);
    out << "level,bin_lo,bin_hi,count\n";
    out.precision(9);
    // The raw record is level 0; P2..P5 are levels 2..5.
    const auto emit = [&](int level, const Tensor& t) {
        const auto h = train::feature_histogram(t, opts.histogram_bins);
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << level << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b]
                << "\n";
    };
    emit(0, x);
    for (std::size_t i = 0; i < 4; ++i) emit(static_cast<int>(i) + 2, pyramid[i]);
}

void eval_single(const EvalOptions& opts, std::ostream& log) {
    LoadedCheckpoint loaded = load_checkpoint(opts.checkpoint_path);
    const datagen::Dataset data = read_any_dataset(opts.dataset_path);
    if (data.empty()) throw ConfigError("evaluation dataset is empty");
    if (static_cast<int>(data[0].samples.size()) != loaded.config.model.input_len)
        throw ConfigError("dataset record length " + std::to_string(data[0].samples.size()) +
                          " does not match checkpoint input_len " +
                          std::to_string(loaded.config.model.input_len));
    const auto report = train::evaluate(*loaded.model, data);
    std::filesystem::create_directories(opts.out_dir);
    write_report_json(opts.out_dir + "/report.json", report, loaded.config, opts.force);
    write_roc_csvs(opts.out_dir, report, loaded.config, opts.force, opts.render_svg);
    if (opts.heatmaps) export_heatmaps(data, opts, loaded.config);
    if (opts.histograms) export_histograms(*loaded.model, data, opts, loaded.config);
    log << "accuracy " << report.accuracy << "  macro_f1 " << report.f1.macro_f1 << "\n";
}

void eval_kfold(const EvalOptions& opts, const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const datagen::Dataset data = read_any_dataset(opts.dataset_path);
    if (data.empty()) throw ConfigError("evaluation dataset is empty");
    if (static_cast<int>(data[0].samples.size()) != cfg.model.input_len)
        throw ConfigError("dataset record length " + std::to_string(data[0].samples.size()) +
                          " does not match model input_len " + std::to_string(cfg.model.input_len));
    const auto folds =
        datagen::kfold_split(static_cast<int>(data.size()), opts.kfold, cfg.train.seed);
    std::filesystem::create_directories(opts.out_dir);
    json grid = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<bool> held(data.size(), false);
        for (int idx : folds[f]) held[static_cast<std::size_t>(idx)] = true;
        datagen::Dataset train_set, test_set;
        for (std::size_t i = 0; i < data.size(); ++i)
            (held[i] ? test_set : train_set).push_back(data[i]);

        RunConfig fold_cfg = cfg;
        fold_cfg.model.seed = hash_seed(cfg.model.seed, f);
        auto model = make_classifier(fold_cfg.model, fold_cfg.model_kind);
        log << "fold " << (f + 1) << "/" << folds.size() << ": train " << train_set.size()
            << ", test " << test_set.size() << "\n";
        const auto result = train::train(*model, train_set, fold_cfg.train, &log);
        auto report = train::evaluate(*model, test_set);
        report.trajectory = result.epochs;
        const auto f1s = result.per_epoch_f1();
        report.epoch_avg_f1 = train::epoch_average_f1(f1s);
        write_report_json(opts.out_dir + "/report_fold" + std::to_string(f + 1) + ".json", report,
                          fold_cfg, opts.force);

        json row;
        row["fold"] = f + 1;
        row["train_size"] = train_set.size();
        row["test_size"] = test_set.size();
        json per_class = json::array();
        for (const auto& s : report.f1.per_class) per_class.push_back(s.f1);
        row["per_class_f1"] = per_class;
        row["macro_f1"] = report.f1.macro_f1;
        grid.push_back(row);
    }
    json summary;
    summary["config"] = json::parse(run_config_json(cfg));
    summary["class_names"] = datagen::kClassNames;
    summary["folds"] = grid;
    auto out = open_out(opts.out_dir + "/cv_summary.json", opts.force);
    out << summary.dump(2) << "\n";
}

}  // namespace

void eval_command(const EvalOptions& opts, const RunConfig* kfold_config, std::ostream& log) {
    if (opts.kfold > 0) {
        if (!kfold_config) throw ConfigError("--kfold needs --config for training parameters");
        eval_kfold(opts, *kfold_config, log);
    } else {
        if (opts.checkpoint_path.empty()) throw ConfigError("eval needs a checkpoint path");
        eval_single(opts, log);
    }
}

void plot(const std::string& csv_path, const std::string& svg_path, bool force) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open CSV file '" + csv_path + "'");
    std::string line;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (names.empty()) {
            bool numeric = true;
            try {
                (void)std::stod(cells.at(0));
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) {
                names.assign(cells.begin() + 1, cells.end());
                columns.assign(cells.size(), {});
                continue;
            }
            names.assign(cells.size() > 1 ? cells.size() - 1 : 0, "");
            columns.assign(cells.size(), {});
        }
        if (cells.size() != columns.size())
            throw ParseError("CSV line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                columns[c].push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw ParseError("CSV line " + std::to_string(line_no) + " cell " +
                                 std::to_string(c) + " is not numeric");
            }
        }
    }
    if (columns.empty() || columns[0].empty())
        throw ParseError("CSV file '" + csv_path + "' has no data rows");
    auto out = open_out(svg_path, force);
    out << svg::line_chart(columns, names,
                           std::filesystem::path(csv_path).filename().string());
    if (!out) throw IoError("write failed for '" + svg_path + "'");
}

}  // namespace vlfsig::commands
