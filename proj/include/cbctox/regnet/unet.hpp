#pragma once

// Registration UNet: 4 stride-2 encoder convs, decoder convs with nearest
// upsampling and skip concatenation, two full-resolution refinement convs,
// and a flow head initialized near zero so training starts at the identity
// deformation. All convs 3x3x3 with leaky-relu(0.2).

#include <array>
#include <string>
#include <vector>

#include "cbctox/nn/layers.hpp"
#include "cbctox/nn/ops.hpp"

namespace cbctox::reg {

struct UNetConfig {
  std::array<std::int64_t, 4> encoder_channels{16, 32, 32, 32};
  std::array<std::int64_t, 7> decoder_channels{32, 32, 32, 32, 32, 16, 16};
  std::int64_t input_channels = 2;  // fixed + moving
  std::int64_t output_channels = 3;
};

template <class T>
struct UNet {
  UNetConfig cfg;
  std::vector<nn::Conv3dLayer<T>> enc;  // stride 2
  std::vector<nn::Conv3dLayer<T>> dec;  // stride 1
  nn::Conv3dLayer<T> flow;

  static UNet init(const UNetConfig& cfg, Rng& rng) {
    UNet u;
    u.cfg = cfg;
    std::int64_t ch = cfg.input_channels;
    for (std::int64_t c : cfg.encoder_channels) {
      u.enc.push_back(nn::Conv3dLayer<T>::init(ch, c, 3, 2, 1, rng));
      ch = c;
    }
    // decoder input widths follow the skip wiring in forward()
    const auto& ec = cfg.encoder_channels;
    const auto& dc = cfg.decoder_channels;
    const std::int64_t ins[7] = {
        ec[3],          dc[0] + ec[2], dc[1] + ec[1], dc[2] + ec[0],
        dc[3],          dc[4] + cfg.input_channels,   dc[5]};
    for (int i = 0; i < 7; ++i)
      u.dec.push_back(nn::Conv3dLayer<T>::init(ins[i], dc[std::size_t(i)], 3,
                                               1, 1, rng));
    u.flow = nn::Conv3dLayer<T>::init(dc[6], cfg.output_channels, 3, 1, 1, rng);
    // near-identity start: tiny weights, zero bias
    for (std::int64_t i = 0; i < u.flow.weight.numel(); ++i)
      u.flow.weight.data()[i] = T(rng.normal(0.0, 1e-5));
    return u;
  }

  // x [N, 2, D, H, W] -> flow [N, 3, D, H, W]
  nn::Tensor<T> forward(nn::Tensor<T> x) const {
    const T slope = T(0.2);
    std::vector<nn::Tensor<T>> skips{x};
    nn::Tensor<T> h = x;
    for (const auto& layer : enc) {
      h = nn::leaky_relu(layer(h), slope);
      skips.push_back(h);
    }
    auto dims_of = [](const nn::Tensor<T>& t) {
      return std::array<std::int64_t, 3>{t.dim(2), t.dim(3), t.dim(4)};
    };
    h = nn::leaky_relu(dec[0](skips[4]), slope);
    h = nn::concat_channels(nn::upsample_nearest(h, dims_of(skips[3])),
                            skips[3]);
    h = nn::leaky_relu(dec[1](h), slope);
    h = nn::concat_channels(nn::upsample_nearest(h, dims_of(skips[2])),
                            skips[2]);
    h = nn::leaky_relu(dec[2](h), slope);
    h = nn::concat_channels(nn::upsample_nearest(h, dims_of(skips[1])),
                            skips[1]);
    h = nn::leaky_relu(dec[3](h), slope);
    h = nn::leaky_relu(dec[4](h), slope);
    h = nn::concat_channels(nn::upsample_nearest(h, dims_of(skips[0])),
                            skips[0]);
    h = nn::leaky_relu(dec[5](h), slope);
    h = nn::leaky_relu(dec[6](h), slope);
    return flow(h);
  }

  void params(nn::ParamList<T>& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < enc.size(); ++i)
      enc[i].params(out, prefix + ".enc" + std::to_string(i));
    for (std::size_t i = 0; i < dec.size(); ++i)
      dec[i].params(out, prefix + ".dec" + std::to_string(i));
    flow.params(out, prefix + ".flow");
  }
};

}  // namespace cbctox::reg
