#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "irp/config_json.hpp"
#include "irp/domain.hpp"
#include "irp/model.hpp"
#include "irp/rng.hpp"
#include "irp/text.hpp"

namespace irp {

// Binary layout:
//   magic "IRP1" | version u32 LE | config block (u32-length-prefixed UTF-8
//   JSON) | tensor count u32 LE | per tensor: name (u32-length-prefixed
//   UTF-8), rank u32, dims u64 each, values f64 LE.
inline constexpr char kCheckpointMagic[4] = {'I', 'R', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    ModelConfig model;
    SummarizerConfig summarizer;
    FeatureMask features;
    double threshold = 0.5;
    std::string vocab_digest;              // hex FNV-1a 64 of the serialized vocabulary
    std::vector<std::string> vocab_tokens; // id order, reserved tokens included
    SplitFractions split;
    std::uint64_t split_seed = 0;
    std::string model_version;
};

struct Checkpoint {
    CheckpointMeta meta;
    ModelParams params;

    Vocabulary vocabulary() const { return Vocabulary::from_tokens(meta.vocab_tokens); }
};

inline std::string vocab_digest_hex(const Vocabulary& vocab) {
    const std::uint64_t h = detail::fnv1a64(vocab.serialize());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void write_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is) {
    const std::uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline std::string read_string(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), n)) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

} // namespace detail

inline void save_checkpoint(ModelParams& params, const CheckpointMeta& meta_in, std::ostream& os) {
    CheckpointMeta meta = meta_in;
    meta.model = params.config;
    if (meta.model_version.empty())
        meta.model_version = "irp1-" + meta.vocab_digest.substr(0, 8);
    json cfg{{"model", meta.model},
             {"summarizer", meta.summarizer},
             {"features", meta.features.names()},
             {"threshold", meta.threshold},
             {"vocab_digest", meta.vocab_digest},
             {"vocab_tokens", meta.vocab_tokens},
             {"split", meta.split},
             {"split_seed", meta.split_seed},
             {"model_version", meta.model_version}};
    os.write(kCheckpointMagic, 4);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_string(os, cfg.dump());
    std::uint32_t count = 0;
    params.for_each_param([&](const std::string&, Tensor&) { ++count; });
    detail::write_u32(os, count);
    params.for_each_param([&](const std::string& name, Tensor& t) {
        detail::write_string(os, name);
        detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) detail::write_u64(os, d);
        for (std::size_t i = 0; i < t.numel(); ++i) detail::write_f64(os, t[i]);
    });
    if (!os) throw std::runtime_error("checkpoint: write failure");
}

inline void save_checkpoint(ModelParams& params, const CheckpointMeta& meta, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(params, meta, os);
    os.flush();
    if (!os) throw std::runtime_error("checkpoint: write failure");
}

inline Checkpoint load_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    json cfg = json::parse(detail::read_string(is));

    Checkpoint ckpt;
    ckpt.meta.model = cfg.at("model").get<ModelConfig>();
    ckpt.meta.summarizer = cfg.at("summarizer").get<SummarizerConfig>();
    ckpt.meta.features = FeatureMask::from_names(cfg.at("features").get<std::vector<std::string>>());
    ckpt.meta.threshold = cfg.at("threshold").get<double>();
    ckpt.meta.vocab_digest = cfg.at("vocab_digest").get<std::string>();
    ckpt.meta.vocab_tokens = cfg.at("vocab_tokens").get<std::vector<std::string>>();
    ckpt.meta.split = cfg.at("split").get<SplitFractions>();
    ckpt.meta.split_seed = cfg.at("split_seed").get<std::uint64_t>();
    ckpt.meta.model_version = cfg.at("model_version").get<std::string>();

    ckpt.params = init_params(ckpt.meta.model, 0);
    std::set<std::string> expected, seen;
    ckpt.params.for_each_param([&](const std::string& n, Tensor&) { expected.insert(n); });

    const std::uint32_t count = detail::read_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = detail::read_string(is);
        if (!expected.count(name)) throw std::runtime_error("checkpoint: unknown tensor " + name);
        if (!seen.insert(name).second) throw std::runtime_error("checkpoint: duplicate tensor " + name);
        const std::uint32_t rank = detail::read_u32(is);
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = static_cast<std::size_t>(detail::read_u64(is));
        Tensor t(dims);
        for (std::size_t j = 0; j < t.numel(); ++j) t[j] = detail::read_f64(is);
        bool placed = false;
        ckpt.params.for_each_param([&](const std::string& n, Tensor& dst) {
            if (n != name) return;
            if (!dst.same_shape(t))
                throw std::runtime_error("checkpoint: tensor " + name + " has shape " + t.shape_string() +
                                         ", expected " + dst.shape_string());
            dst = t;
            placed = true;
        });
        if (!placed) throw std::runtime_error("checkpoint: unknown tensor " + name);
    }
    if (seen.size() != expected.size()) {
        for (const auto& n : expected)
            if (!seen.count(n)) throw std::runtime_error("checkpoint: missing tensor " + n);
    }
    return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    return load_checkpoint(is);
}

/// Guards against serving or evaluating with a vocabulary other than the one
/// the checkpoint was trained with.
inline void require_vocab_match(const Checkpoint& ckpt, const Vocabulary& vocab) {
    const std::string digest = vocab_digest_hex(vocab);
    if (digest != ckpt.meta.vocab_digest)
        throw std::runtime_error("checkpoint: vocabulary digest mismatch (checkpoint " +
                                 ckpt.meta.vocab_digest + ", supplied " + digest + ")");
}

} // namespace irp
