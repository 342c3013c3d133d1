#pragma once

// Self-describing binary model checkpoints: magic + format version, the model
// config as JSON, then every named weight array with its shape. Raw little-
// endian doubles, so save -> load round-trips bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsta/config.hpp"
#include "qsta/model.hpp"

namespace qsta::model {

namespace detail_ckpt {

constexpr char kMagic[8] = {'Q', 'S', 'T', 'A', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace detail_ckpt

inline void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os.write(detail_ckpt::kMagic, sizeof(detail_ckpt::kMagic));
    const std::string cfg_json = cfg::to_json(m.config()).dump();
    detail_ckpt::write_u64(os, cfg_json.size());
    os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));
    detail_ckpt::write_u64(os, m.params().size());
    for (const auto& p : m.params()) {
        detail_ckpt::write_u64(os, p.name.size());
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail_ckpt::write_u64(os, p.tensor.ndim());
        for (auto d : p.tensor.shape()) detail_ckpt::write_u64(os, d);
        os.write(reinterpret_cast<const char*>(p.tensor.data().data()),
                 static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail_ckpt::kMagic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto cfg_len = detail_ckpt::read_u64(is);
    std::string cfg_json(cfg_len, '\0');
    is.read(cfg_json.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw std::runtime_error("checkpoint: truncated config in " + path);
    ModelConfig config = cfg::model_from_json(cfg::json::parse(cfg_json));

    Model m = Model::init(config, 0);
    const auto n_params = detail_ckpt::read_u64(is);
    if (n_params != m.params().size())
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const auto name_len = detail_ckpt::read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto ndim = detail_ckpt::read_u64(is);
        std::vector<std::size_t> shape(ndim);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = detail_ckpt::read_u64(is);
            count *= d;
        }
        Tensor& t = m.param(name);
        if (t.shape() != shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' in " + path);
        is.read(reinterpret_cast<char*>(t.data().data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated weights in " + path);
    }
    return m;
}

}  // namespace qsta::model
