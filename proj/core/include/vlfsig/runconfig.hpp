#pragma once

#include <optional>
#include <string>

#include "vlfsig/dsp.hpp"
#include "vlfsig/model.hpp"
#include "vlfsig/train.hpp"

namespace vlfsig {

struct GenerateConfig {
    int per_class = 200;
    std::uint64_t seed = 1;
    void validate() const;
};

// The one document every command reads and every artifact embeds. Unknown
// JSON keys are rejected so typos fail loudly before any work starts.
struct RunConfig {
    std::string model_kind = "msrt";
    ModelConfig model;
    train::TrainConfig train;
    dsp::FilterSpec filter;
    GenerateConfig generate;

    void validate() const;
    // One shared seed for generator, init, and training shuffles.
    void override_seed(std::uint64_t seed);
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);  // canonical serialization

}  // namespace vlfsig
