#pragma once

// Checkpoint file: magic line, 8-byte LE manifest length, JSON manifest of
// {name, shape, offset} entries, then the concatenated f32 little-endian
// payload. Reload is byte-exact.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbctox/error.hpp"
#include "cbctox/nn/tensor.hpp"

namespace cbctox::nn {

inline constexpr char kCheckpointMagic[] = "CBCTOXCKPT1\n";

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  float* data;  // borrowed
  std::int64_t numel;
};

inline void save_checkpoint(const std::filesystem::path& path,
                            const std::vector<NamedArray>& arrays) {
  nlohmann::json manifest = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& a : arrays) {
    manifest.push_back({{"name", a.name},
                        {"shape", a.shape},
                        {"offset", offset}});
    offset += a.numel * std::int64_t(sizeof(float));
  }
  const std::string mtext = manifest.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "io", "cannot write checkpoint: " + path.string());
  f.write(kCheckpointMagic, std::streamsize(std::strlen(kCheckpointMagic)));
  const std::uint64_t mlen = mtext.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(mtext.data(), std::streamsize(mtext.size()));
  for (const auto& a : arrays)
    f.write(reinterpret_cast<const char*>(a.data),
            std::streamsize(a.numel * std::int64_t(sizeof(float))));
  require(f.good(), "io", "short write to checkpoint: " + path.string());
}

// Loads into the provided named arrays; every array must be present with a
// matching shape.
inline void load_checkpoint(const std::filesystem::path& path,
                            const std::vector<NamedArray>& arrays) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "io", "cannot open checkpoint: " + path.string());
  std::string magic(std::strlen(kCheckpointMagic), '\0');
  f.read(magic.data(), std::streamsize(magic.size()));
  require(magic == kCheckpointMagic, "format",
          "not a checkpoint file: " + path.string());
  std::uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mtext(mlen, '\0');
  f.read(mtext.data(), std::streamsize(mlen));
  require(f.good(), "io", "truncated checkpoint: " + path.string());
  const nlohmann::json manifest = nlohmann::json::parse(mtext);
  const std::streamoff payload =
      std::streamoff(std::strlen(kCheckpointMagic)) + 8 +
      std::streamoff(mlen);

  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : manifest) by_name[e.at("name")] = &e;
  for (const auto& a : arrays) {
    const auto it = by_name.find(a.name);
    require(it != by_name.end(), "format",
            "checkpoint misses parameter '" + a.name + "'");
    const auto& e = *it->second;
    const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
    require(shape == a.shape, "shape",
            "checkpoint shape mismatch for '" + a.name + "'");
    f.seekg(payload + std::streamoff(e.at("offset").get<std::int64_t>()));
    f.read(reinterpret_cast<char*>(a.data),
           std::streamsize(a.numel * std::int64_t(sizeof(float))));
    require(f.good(), "io", "truncated checkpoint payload for '" + a.name + "'");
  }
}

// helpers for models exposing params()/buffers()
inline std::vector<NamedArray> arrays_of(
    ParamList<float>& params,
    std::vector<std::pair<std::string, std::vector<float>*>>& buffers) {
  std::vector<NamedArray> out;
  for (auto& [name, t] : params)
    out.push_back({name, t.shape(), t.data(), t.numel()});
  for (auto& [name, v] : buffers)
    out.push_back({name,
                   {std::int64_t(v->size())},
                   v->data(),
                   std::int64_t(v->size())});
  return out;
}

}  // namespace cbctox::nn
