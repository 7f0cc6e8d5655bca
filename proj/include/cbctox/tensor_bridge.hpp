#pragma once

// Volume <-> graph tensor conversion. Volume [c][z][y][x] maps to tensor
// [N=1, C, D=z, H=y, W=x]; the flat layout is identical, so these are plain
// copies.

#include <cstring>

#include "cbctox/nn/tensor.hpp"
#include "cbctox/volume.hpp"

namespace cbctox {

template <class T = float>
nn::Tensor<T> volume_to_tensor(const Volume& v, bool requires_grad = false) {
  nn::Tensor<T> t = nn::Tensor<T>::zeros(
      {1, v.channels, v.nz(), v.ny(), v.nx()}, requires_grad);
  if constexpr (std::is_same_v<T, float>) {
    std::memcpy(t.data(), v.data.data(), v.data.size() * sizeof(float));
  } else {
    for (std::size_t i = 0; i < v.data.size(); ++i) t.data()[i] = T(v.data[i]);
  }
  return t;
}

// batch [N,C,D,H,W] from same-grid volumes
template <class T = float>
nn::Tensor<T> stack_volumes(const std::vector<const Volume*>& vols) {
  require(!vols.empty(), "shape", "stack_volumes: empty batch");
  const Volume& first = *vols.front();
  nn::Tensor<T> t = nn::Tensor<T>::zeros(
      {std::int64_t(vols.size()), first.channels, first.nz(), first.ny(),
       first.nx()});
  const std::int64_t per = first.numel();
  for (std::size_t i = 0; i < vols.size(); ++i) {
    require(vols[i]->same_grid(first) && vols[i]->channels == first.channels,
            "shape", "stack_volumes: grid mismatch");
    for (std::int64_t j = 0; j < per; ++j)
      t.data()[std::int64_t(i) * per + j] = T(vols[i]->data[std::size_t(j)]);
  }
  return t;
}

// sample `index` of a [N,C,D,H,W] tensor onto the given grid metadata
template <class T = float>
Volume tensor_to_volume(const nn::Tensor<T>& t, const Volume& grid_like,
                        std::int64_t index = 0) {
  Volume v = Volume::make({t.dim(4), t.dim(3), t.dim(2)}, t.dim(1),
                          grid_like.spacing_mm, grid_like.origin_mm);
  const std::int64_t per = v.numel();
  for (std::int64_t j = 0; j < per; ++j)
    v.data[std::size_t(j)] = float(t.data()[index * per + j]);
  return v;
}

}  // namespace cbctox
