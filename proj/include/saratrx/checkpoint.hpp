#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "saratrx/backbone.hpp"
#include "saratrx/common.hpp"
#include "saratrx/nn.hpp"

namespace saratrx {

inline constexpr const char* kToolVersion = "0.1.0";

// Named-tensor archive (binary, float64) plus a JSON sidecar with config,
// epoch, global step, RNG seed, parameter count and config hash.
struct EncoderCheckpoint {
    backbone::EncoderConfig config;
    int epoch = 0;
    std::int64_t global_step = 0;
    std::uint64_t rng_seed = 0;
    std::map<std::string, Mat<double>> tensors;

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& [k, v] : tensors) n += v.size();
        return n;
    }
};

std::string encoder_config_to_json(const backbone::EncoderConfig& cfg);
backbone::EncoderConfig encoder_config_from_json(const std::string& text);

// FNV-1a over the canonical config JSON.
std::string config_hash(const backbone::EncoderConfig& cfg);
std::string fnv1a_hex(const std::string& text);

// Writes <base>.bin and <base>.json.
void save_checkpoint(const EncoderCheckpoint& ckpt, const std::filesystem::path& base);
// Accepts the base path or either sidecar file.
EncoderCheckpoint load_checkpoint(const std::filesystem::path& base);

// Copy live parameters into the archive map (upcast to double).
template <class S>
void store_params(const nn::ParamRefs<S>& params, std::map<std::string, Mat<double>>& tensors) {
    for (const auto* p : params) tensors[p->name] = p->value.template cast<double>();
}

// Restore parameters by name. Every parameter must be present with matching
// shape; nothing is written on mismatch.
template <class S>
void load_params(const std::map<std::string, Mat<double>>& tensors, nn::ParamRefs<S>& params) {
    for (const auto* p : params) {
        auto it = tensors.find(p->name);
        if (it == tensors.end())
            throw RuntimeError("incompatible checkpoint: missing tensor " + p->name);
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
            throw RuntimeError("incompatible checkpoint: shape mismatch for " + p->name);
    }
    for (auto* p : params) p->value = tensors.at(p->name).template cast<S>();
}

// Rebuild a live encoder from a checkpoint (strict load, no partial).
template <class S>
backbone::Encoder<S> make_encoder(const EncoderCheckpoint& ckpt) {
    backbone::Encoder<S> enc(ckpt.config, ckpt.rng_seed);
    nn::ParamRefs<S> params;
    enc.collect(params);
    load_params(ckpt.tensors, params);
    return enc;
}

}  // namespace saratrx
