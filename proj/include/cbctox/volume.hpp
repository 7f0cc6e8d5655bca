#pragma once

// Volume data model and the "v3j" on-disk format: a JSON sidecar header next
// to a raw little-endian f32 payload, ordered channel -> z -> y -> x with x
// fastest. Round-trips are bit-exact.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cbctox {

struct Volume {
  std::array<std::int64_t, 3> dims{0, 0, 0};       // nx, ny, nz
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};  // sx, sy, sz
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};
  std::int64_t channels = 1;
  std::vector<float> data;  // [c][z][y][x]

  std::int64_t nx() const { return dims[0]; }
  std::int64_t ny() const { return dims[1]; }
  std::int64_t nz() const { return dims[2]; }
  std::int64_t voxels() const { return dims[0] * dims[1] * dims[2]; }
  std::int64_t numel() const { return channels * voxels(); }

  std::int64_t index(std::int64_t c, std::int64_t x, std::int64_t y,
                     std::int64_t z) const {
    return ((c * dims[2] + z) * dims[1] + y) * dims[0] + x;
  }
  float at(std::int64_t c, std::int64_t x, std::int64_t y,
           std::int64_t z) const {
    return data[index(c, x, y, z)];
  }
  float& at(std::int64_t c, std::int64_t x, std::int64_t y, std::int64_t z) {
    return data[index(c, x, y, z)];
  }
  const float* channel(std::int64_t c) const { return data.data() + c * voxels(); }
  float* channel(std::int64_t c) { return data.data() + c * voxels(); }

  bool same_grid(const Volume& o) const {
    return dims == o.dims && spacing_mm == o.spacing_mm &&
           origin_mm == o.origin_mm;
  }

  // voxel index -> physical position (mm), and back
  std::array<double, 3> to_mm(double x, double y, double z) const {
    return {origin_mm[0] + x * spacing_mm[0], origin_mm[1] + y * spacing_mm[1],
            origin_mm[2] + z * spacing_mm[2]};
  }
  std::array<double, 3> to_voxel(const std::array<double, 3>& p) const {
    return {(p[0] - origin_mm[0]) / spacing_mm[0],
            (p[1] - origin_mm[1]) / spacing_mm[1],
            (p[2] - origin_mm[2]) / spacing_mm[2]};
  }

  static Volume make(std::array<std::int64_t, 3> dims, std::int64_t channels,
                     std::array<double, 3> spacing_mm = {1, 1, 1},
                     std::array<double, 3> origin_mm = {0, 0, 0},
                     float fill = 0.f);

  void validate() const;  // dims/spacing/data-length invariants
};

// Binary {0,1} companion to a Volume on the same grid.
struct MaskVolume {
  Volume vol;  // single channel, values in {0,1}

  std::int64_t count() const;  // foreground voxels
  static MaskVolume ones_like(const Volume& v);
  void validate() const;
};

// ---- v3j I/O ---------------------------------------------------------------
Volume read_volume(const std::filesystem::path& header_path);
void write_volume(const Volume& vol, const std::filesystem::path& header_path);

}  // namespace cbctox
