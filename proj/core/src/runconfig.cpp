#include "vlfsig/runconfig.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vlfsig {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void GenerateConfig::validate() const {
    if (per_class < 1) throw ConfigError("generate.per_class must be >= 1");
}

void RunConfig::validate() const {
    if (model_kind != "msrt" && model_kind != "baseline")
        throw ConfigError("model_kind must be 'msrt' or 'baseline', got '" + model_kind + "'");
    model.validate();
    train.validate();
    filter.validate();
    generate.validate();
}

void RunConfig::override_seed(std::uint64_t seed) {
    model.seed = seed;
    train.seed = seed;
    generate.seed = seed;
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what(),
                         static_cast<std::size_t>(e.byte));
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(j, {"model_kind", "model", "train", "filter", "generate"}, "");

    RunConfig cfg;
    get_if(j, "model_kind", cfg.model_kind);
    try {
        if (j.contains("model")) {
            const json& m = j.at("model");
            reject_unknown(m,
                           {"input_len", "stem_channels", "stage_channels", "blocks_per_stage",
                            "fpn_channels", "d_model", "n_heads", "n_layers", "d_ff", "n_classes",
                            "seed", "tokens_p2_only"},
                           "model.");
            get_if(m, "input_len", cfg.model.input_len);
            get_if(m, "stem_channels", cfg.model.stem_channels);
            get_if(m, "stage_channels", cfg.model.stage_channels);
            get_if(m, "blocks_per_stage", cfg.model.blocks_per_stage);
            get_if(m, "fpn_channels", cfg.model.fpn_channels);
            get_if(m, "d_model", cfg.model.d_model);
            get_if(m, "n_heads", cfg.model.n_heads);
            get_if(m, "n_layers", cfg.model.n_layers);
            get_if(m, "d_ff", cfg.model.d_ff);
            get_if(m, "n_classes", cfg.model.n_classes);
            get_if(m, "seed", cfg.model.seed);
            get_if(m, "tokens_p2_only", cfg.model.tokens_p2_only);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t,
                           {"batch_size", "epochs", "learning_rate", "beta1", "beta2", "adam_eps",
                            "seed", "target_accuracy"},
                           "train.");
            get_if(t, "batch_size", cfg.train.batch_size);
            get_if(t, "epochs", cfg.train.epochs);
            get_if(t, "learning_rate", cfg.train.learning_rate);
            get_if(t, "beta1", cfg.train.beta1);
            get_if(t, "beta2", cfg.train.beta2);
            get_if(t, "adam_eps", cfg.train.adam_eps);
            get_if(t, "seed", cfg.train.seed);
            get_if(t, "target_accuracy", cfg.train.target_accuracy);
        }
        if (j.contains("filter")) {
            const json& f = j.at("filter");
            reject_unknown(f,
                           {"sample_rate_hz", "lowpass_cutoff_hz", "lowpass_order",
                            "notch_base_hz", "notch_harmonics", "notch_q"},
                           "filter.");
            get_if(f, "sample_rate_hz", cfg.filter.sample_rate_hz);
            get_if(f, "lowpass_cutoff_hz", cfg.filter.lowpass_cutoff_hz);
            get_if(f, "lowpass_order", cfg.filter.lowpass_order);
            get_if(f, "notch_base_hz", cfg.filter.notch_base_hz);
            get_if(f, "notch_harmonics", cfg.filter.notch_harmonics);
            get_if(f, "notch_q", cfg.filter.notch_q);
        }
        if (j.contains("generate")) {
            const json& g = j.at("generate");
            reject_unknown(g, {"per_class", "seed"}, "generate.");
            get_if(g, "per_class", cfg.generate.per_class);
            get_if(g, "seed", cfg.generate.seed);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& cfg) {
    json j;
    j["model_kind"] = cfg.model_kind;
    j["model"] = {{"input_len", cfg.model.input_len},
                  {"stem_channels", cfg.model.stem_channels},
                  {"stage_channels", cfg.model.stage_channels},
                  {"blocks_per_stage", cfg.model.blocks_per_stage},
                  {"fpn_channels", cfg.model.fpn_channels},
                  {"d_model", cfg.model.d_model},
                  {"n_heads", cfg.model.n_heads},
                  {"n_layers", cfg.model.n_layers},
                  {"d_ff", cfg.model.d_ff},
                  {"n_classes", cfg.model.n_classes},
                  {"seed", cfg.model.seed},
                  {"tokens_p2_only", cfg.model.tokens_p2_only}};
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"learning_rate", cfg.train.learning_rate},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"seed", cfg.train.seed},
                  {"target_accuracy", cfg.train.target_accuracy}};
    j["filter"] = {{"sample_rate_hz", cfg.filter.sample_rate_hz},
                   {"lowpass_cutoff_hz", cfg.filter.lowpass_cutoff_hz},
                   {"lowpass_order", cfg.filter.lowpass_order},
                   {"notch_base_hz", cfg.filter.notch_base_hz},
                   {"notch_harmonics", cfg.filter.notch_harmonics},
                   {"notch_q", cfg.filter.notch_q}};
    j["generate"] = {{"per_class", cfg.generate.per_class}, {"seed", cfg.generate.seed}};
    return j.dump(2);
}

}  // namespace vlfsig
