#include "cbctox/volume.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cbctox/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "v3j payloads are little-endian; big-endian hosts unsupported");

namespace cbctox {

Volume Volume::make(std::array<std::int64_t, 3> dims, std::int64_t channels,
                    std::array<double, 3> spacing_mm,
                    std::array<double, 3> origin_mm, float fill) {
  Volume v;
  v.dims = dims;
  v.channels = channels;
  v.spacing_mm = spacing_mm;
  v.origin_mm = origin_mm;
  v.data.assign(static_cast<std::size_t>(v.numel()), fill);
  v.validate();
  return v;
}

void Volume::validate() const {
  require(dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1, "shape",
          "volume dims must be >= 1");
  require(spacing_mm[0] > 0 && spacing_mm[1] > 0 && spacing_mm[2] > 0, "shape",
          "volume spacing must be > 0");
  require(channels >= 1, "shape", "volume channels must be >= 1");
  require(static_cast<std::int64_t>(data.size()) == numel(), "shape",
          "volume data length does not match dims*channels");
}

std::int64_t MaskVolume::count() const {
  std::int64_t c = 0;
  for (float v : vol.data) c += v != 0.f;
  return c;
}

MaskVolume MaskVolume::ones_like(const Volume& v) {
  MaskVolume m;
  m.vol = Volume::make(v.dims, 1, v.spacing_mm, v.origin_mm, 1.f);
  return m;
}

void MaskVolume::validate() const {
  vol.validate();
  require(vol.channels == 1, "shape", "mask must be single-channel");
  for (float v : vol.data)
    require(v == 0.f || v == 1.f, "domain", "mask values must be 0 or 1");
}

Volume read_volume(const std::filesystem::path& header_path) {
  std::ifstream hf(header_path);
  require(hf.good(), "io", "cannot open volume header: " + header_path.string());
  nlohmann::json j;
  try {
    hf >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("io", "malformed v3j header " + header_path.string() + ": " + e.what());
  }

  Volume v;
  try {
    const auto d = j.at("dims");
    const auto s = j.at("spacing_mm");
    const auto o = j.at("origin_mm");
    for (int i = 0; i < 3; ++i) {
      v.dims[i] = d.at(i).get<std::int64_t>();
      v.spacing_mm[i] = s.at(i).get<double>();
      v.origin_mm[i] = o.at(i).get<double>();
    }
    v.channels = j.at("channels").get<std::int64_t>();
    const std::string dtype = j.at("dtype").get<std::string>();
    require(dtype == "f32le", "format",
            "unsupported dtype '" + dtype + "' in " + header_path.string());
  } catch (const nlohmann::json::exception& e) {
    fail("format",
         "invalid v3j header " + header_path.string() + ": " + e.what());
  }

  const std::filesystem::path raw_path =
      header_path.parent_path() / j.at("data").get<std::string>();
  std::ifstream rf(raw_path, std::ios::binary);
  require(rf.good(), "io", "cannot open raw payload: " + raw_path.string());
  rf.seekg(0, std::ios::end);
  const std::int64_t bytes = rf.tellg();
  rf.seekg(0);
  const std::int64_t expect = v.numel() * static_cast<std::int64_t>(sizeof(float));
  require(bytes == expect, "format",
          "raw payload " + raw_path.string() + " holds " +
              std::to_string(bytes) + " bytes, header expects " +
              std::to_string(expect));
  v.data.resize(static_cast<std::size_t>(v.numel()));
  rf.read(reinterpret_cast<char*>(v.data.data()), expect);
  require(rf.good(), "io", "short read from " + raw_path.string());
  v.validate();
  return v;
}

void write_volume(const Volume& vol, const std::filesystem::path& header_path) {
  vol.validate();
  std::filesystem::path raw_path = header_path;
  raw_path.replace_extension(".raw");

  nlohmann::json j;
  j["dims"] = {vol.dims[0], vol.dims[1], vol.dims[2]};
  j["spacing_mm"] = {vol.spacing_mm[0], vol.spacing_mm[1], vol.spacing_mm[2]};
  j["origin_mm"] = {vol.origin_mm[0], vol.origin_mm[1], vol.origin_mm[2]};
  j["channels"] = vol.channels;
  j["dtype"] = "f32le";
  j["data"] = raw_path.filename().string();

  {
    std::ofstream rf(raw_path, std::ios::binary | std::ios::trunc);
    require(rf.good(), "io", "cannot write raw payload: " + raw_path.string());
    rf.write(reinterpret_cast<const char*>(vol.data.data()),
             vol.numel() * static_cast<std::int64_t>(sizeof(float)));
    require(rf.good(), "io", "short write to " + raw_path.string());
  }
  std::ofstream hf(header_path, std::ios::trunc);
  require(hf.good(), "io", "cannot write header: " + header_path.string());
  hf << j.dump(2) << "\n";
  require(hf.good(), "io", "short write to " + header_path.string());
}

}  // namespace cbctox
