#pragma once

#include <memory>
#include <string>

#include "vlfsig/model.hpp"
#include "vlfsig/runconfig.hpp"

namespace vlfsig {

// Checkpoint layout: u32 header length (little-endian), UTF-8 JSON header
// {version, model_kind, config, tensors:[{name, shape, offset}]}, then a
// payload of 32-bit little-endian floats. Offsets are byte positions into
// the payload. save -> load -> save is byte-identical.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, Classifier& model, const RunConfig& cfg, bool force);

struct LoadedCheckpoint {
    std::unique_ptr<Classifier> model;
    RunConfig config;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace vlfsig
