#include "vlfsig/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace vlfsig {

using nlohmann::json;

void save_checkpoint(const std::string& path, Classifier& model, const RunConfig& cfg,
                     bool force) {
    if (!force && std::filesystem::exists(path))
        throw IoError("output path '" + path + "' exists; pass --force to overwrite");

    json tensors = json::array();
    std::vector<float> payload;
    for (const auto& p : model.parameters()) {
        json t;
        t["name"] = p.name;
        t["shape"] = p.tensor.shape();
        t["offset"] = payload.size() * 4;
        tensors.push_back(t);
        for (double v : p.tensor.values()) payload.push_back(static_cast<float>(v));
    }
    json header;
    header["version"] = kCheckpointVersion;
    header["model_kind"] = model.kind();
    header["config"] = json::parse(run_config_json(cfg));
    header["tensors"] = tensors;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const auto hlen = static_cast<std::uint32_t>(header_text.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * 4));
    if (!out) throw IoError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file '" + path + "'");
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (in.gcount() != 4) throw ParseError("truncated checkpoint: missing header length", 0);
    std::string header_text(hlen, '\0');
    in.read(header_text.data(), hlen);
    if (in.gcount() != static_cast<std::streamsize>(hlen))
        throw ParseError("truncated checkpoint header: expected " + std::to_string(hlen) +
                             " bytes, got " + std::to_string(in.gcount()),
                         4);
    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint header is not valid JSON: ") + e.what(),
                         4 + static_cast<std::size_t>(e.byte));
    }
    std::vector<float> payload;
    {
        std::vector<char> rest((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        if (rest.size() % 4 != 0)
            throw ParseError("checkpoint payload size " + std::to_string(rest.size()) +
                                 " is not a multiple of 4",
                             4 + hlen);
        payload.resize(rest.size() / 4);
        std::memcpy(payload.data(), rest.data(), rest.size());
    }

    LoadedCheckpoint out;
    try {
        if (header.at("version").get<int>() != kCheckpointVersion)
            throw ParseError("unsupported checkpoint version", 4);
        out.config = parse_run_config(header.at("config").dump());
        const std::string kind = header.at("model_kind").get<std::string>();
        out.model = make_classifier(out.config.model, kind);

        const json& tensors = header.at("tensors");
        auto& params = out.model->parameters();
        if (tensors.size() != params.size())
            throw ParseError("checkpoint lists " + std::to_string(tensors.size()) +
                                 " tensors; the model has " + std::to_string(params.size()),
                             4);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const json& t = tensors.at(i);
            if (t.at("name").get<std::string>() != params[i].name)
                throw ParseError("checkpoint tensor '" + t.at("name").get<std::string>() +
                                     "' does not match expected '" + params[i].name + "'",
                                 4);
            const auto shape = t.at("shape").get<Shape>();
            if (shape != params[i].tensor.shape())
                throw ParseError("checkpoint tensor '" + params[i].name + "' has shape " +
                                     shape_str(shape) + ", expected " +
                                     shape_str(params[i].tensor.shape()),
                                 4);
            const auto offset = t.at("offset").get<std::size_t>();
            const auto count = static_cast<std::size_t>(params[i].tensor.size());
            if (offset % 4 != 0 || offset / 4 + count > payload.size())
                throw ParseError("checkpoint tensor '" + params[i].name +
                                     "' payload range out of bounds",
                                 4 + hlen + offset);
            auto dst = params[i].tensor.values_mut();
            for (std::size_t k = 0; k < count; ++k)
                dst[k] = static_cast<double>(payload[offset / 4 + k]);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed checkpoint header: ") + e.what(), 4);
    }
    return out;
}

}  // namespace vlfsig
