#include "saratrx/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

namespace saratrx {

using nlohmann::json;

std::string encoder_config_to_json(const backbone::EncoderConfig& cfg) {
    json j;
    j["input_size"] = cfg.input_size;
    j["patch_size"] = cfg.patch_size;
    j["variant"] = backbone::to_string(cfg.variant);
    j["dim1"] = cfg.dim1;
    j["dim2"] = cfg.dim2;
    j["dim3"] = cfg.dim3;
    j["depth1"] = cfg.depth1;
    j["depth2"] = cfg.depth2;
    j["depth3"] = cfg.depth3;
    j["heads"] = cfg.heads;
    j["mlp_ratio"] = cfg.mlp_ratio;
    return j.dump();
}

backbone::EncoderConfig encoder_config_from_json(const std::string& text) {
    json j = json::parse(text);
    backbone::EncoderConfig cfg;
    cfg.input_size = j.at("input_size").get<int>();
    cfg.patch_size = j.at("patch_size").get<int>();
    cfg.variant = backbone::variant_from_string(j.at("variant").get<std::string>());
    cfg.dim1 = j.at("dim1").get<int>();
    cfg.dim2 = j.at("dim2").get<int>();
    cfg.dim3 = j.at("dim3").get<int>();
    cfg.depth1 = j.at("depth1").get<int>();
    cfg.depth2 = j.at("depth2").get<int>();
    cfg.depth3 = j.at("depth3").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.mlp_ratio = j.at("mlp_ratio").get<double>();
    return cfg;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const backbone::EncoderConfig& cfg) {
    return fnv1a_hex(encoder_config_to_json(cfg));
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'R', 'X'};
constexpr std::uint32_t kArchiveVersion = 1;

template <class T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw RuntimeError("truncated checkpoint archive");
    return v;
}

}  // namespace

void save_checkpoint(const EncoderCheckpoint& ckpt, const std::filesystem::path& base) {
    const auto bin = std::filesystem::path(base.string() + ".bin");
    const auto meta = std::filesystem::path(base.string() + ".json");

    std::ofstream out(bin, std::ios::binary);
    if (!out) throw RuntimeError("cannot write checkpoint: " + bin.string());
    out.write(kMagic, 4);
    write_raw(out, kArchiveVersion);
    write_raw(out, std::uint64_t(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        write_raw(out, std::uint32_t(name.size()));
        out.write(name.data(), std::streamsize(name.size()));
        write_raw(out, std::uint64_t(tensor.rows()));
        write_raw(out, std::uint64_t(tensor.cols()));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  std::streamsize(sizeof(double)) * tensor.size());
    }

    json j;
    j["config"] = json::parse(encoder_config_to_json(ckpt.config));
    j["config_hash"] = config_hash(ckpt.config);
    j["epoch"] = ckpt.epoch;
    j["global_step"] = ckpt.global_step;
    j["rng_seed"] = ckpt.rng_seed;
    j["parameter_count"] = ckpt.parameter_count();
    j["tool_version"] = kToolVersion;
    std::ofstream ms(meta, std::ios::binary);
    if (!ms) throw RuntimeError("cannot write checkpoint sidecar: " + meta.string());
    ms << j.dump(2) << '\n';
}

EncoderCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::filesystem::path base = path;
    if (base.extension() == ".bin" || base.extension() == ".json") base.replace_extension();
    const auto bin = std::filesystem::path(base.string() + ".bin");
    const auto meta = std::filesystem::path(base.string() + ".json");

    EncoderCheckpoint ckpt;
    {
        std::ifstream ms(meta, std::ios::binary);
        if (!ms) throw RuntimeError("cannot read checkpoint sidecar: " + meta.string());
        json j = json::parse(ms);
        ckpt.config = encoder_config_from_json(j.at("config").dump());
        ckpt.epoch = j.at("epoch").get<int>();
        ckpt.global_step = j.at("global_step").get<std::int64_t>();
        ckpt.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    }
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw RuntimeError("cannot read checkpoint: " + bin.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw RuntimeError("bad checkpoint magic: " + bin.string());
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kArchiveVersion) throw RuntimeError("unsupported checkpoint version");
    const auto count = read_raw<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = read_raw<std::uint64_t>(in);
        const auto cols = read_raw<std::uint64_t>(in);
        Mat<double> tensor(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(tensor.data()),
                std::streamsize(sizeof(double)) * tensor.size());
        if (!in) throw RuntimeError("truncated checkpoint archive");
        ckpt.tensors.emplace(std::move(name), std::move(tensor));
    }
    return ckpt;
}

}  // namespace saratrx
