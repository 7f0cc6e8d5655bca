#pragma once

// 3D ResNet feature extractors, the 34 (basic-block) and 50 (bottleneck)
// variants with canonical stage layout [3,4,6,3], 7x7x7/s2 stem, 3x3x3/s2
// max pool and global average pooling to the latent vector (512 resp. 2048
// at the canonical base width of 64). base_width scales every stage; tests
// use tiny widths.

#include <string>
#include <vector>

#include "cbctox/nn/layers.hpp"
#include "cbctox/nn/ops.hpp"

namespace cbctox::tox {

struct ResNetBranchConfig {
  int variant = 50;  // 34 or 50
  std::int64_t in_channels = 1;
  std::int64_t base_width = 64;

  std::int64_t latent_width() const {
    return variant == 34 ? base_width * 8 : base_width * 32;
  }
  void validate() const {
    require(variant == 34 || variant == 50, "domain",
            "resnet variant must be 34 or 50");
    require(in_channels >= 1 && base_width >= 1, "shape",
            "bad resnet branch config");
  }
};

template <class T>
struct ResBlock {
  bool bottleneck = false;
  nn::Conv3dLayer<T> c1, c2, c3;
  nn::BatchNormLayer<T> b1, b2, b3;
  bool has_down = false;
  nn::Conv3dLayer<T> down;
  nn::BatchNormLayer<T> bdown;

  static ResBlock basic(std::int64_t cin, std::int64_t cout,
                        std::int64_t stride, Rng& rng) {
    ResBlock b;
    b.bottleneck = false;
    b.c1 = nn::Conv3dLayer<T>::init(cin, cout, 3, stride, 1, rng);
    b.b1 = nn::BatchNormLayer<T>::init(cout);
    b.c2 = nn::Conv3dLayer<T>::init(cout, cout, 3, 1, 1, rng);
    b.b2 = nn::BatchNormLayer<T>::init(cout);
    if (stride != 1 || cin != cout) {
      b.has_down = true;
      b.down = nn::Conv3dLayer<T>::init(cin, cout, 1, stride, 0, rng);
      b.bdown = nn::BatchNormLayer<T>::init(cout);
    }
    return b;
  }

  static ResBlock bottleneck_block(std::int64_t cin, std::int64_t mid,
                                   std::int64_t stride, Rng& rng) {
    const std::int64_t cout = mid * 4;
    ResBlock b;
    b.bottleneck = true;
    b.c1 = nn::Conv3dLayer<T>::init(cin, mid, 1, 1, 0, rng);
    b.b1 = nn::BatchNormLayer<T>::init(mid);
    b.c2 = nn::Conv3dLayer<T>::init(mid, mid, 3, stride, 1, rng);
    b.b2 = nn::BatchNormLayer<T>::init(mid);
    b.c3 = nn::Conv3dLayer<T>::init(mid, cout, 1, 1, 0, rng);
    b.b3 = nn::BatchNormLayer<T>::init(cout);
    if (stride != 1 || cin != cout) {
      b.has_down = true;
      b.down = nn::Conv3dLayer<T>::init(cin, cout, 1, stride, 0, rng);
      b.bdown = nn::BatchNormLayer<T>::init(cout);
    }
    return b;
  }

  nn::Tensor<T> forward(nn::Tensor<T> x, bool training) {
    nn::Tensor<T> skip = x;
    if (has_down) skip = bdown(down(x), training);
    nn::Tensor<T> h = nn::relu(b1(c1(x), training));
    if (bottleneck) {
      h = nn::relu(b2(c2(h), training));
      h = b3(c3(h), training);
    } else {
      h = b2(c2(h), training);
    }
    return nn::relu(nn::add(h, skip));
  }

  void params(nn::ParamList<T>& out, const std::string& p) {
    c1.params(out, p + ".c1");
    b1.params(out, p + ".b1");
    c2.params(out, p + ".c2");
    b2.params(out, p + ".b2");
    if (bottleneck) {
      c3.params(out, p + ".c3");
      b3.params(out, p + ".b3");
    }
    if (has_down) {
      down.params(out, p + ".down");
      bdown.params(out, p + ".bdown");
    }
  }
  void buffers(std::vector<std::pair<std::string, std::vector<T>*>>& out,
               const std::string& p) {
    b1.buffers(out, p + ".b1");
    b2.buffers(out, p + ".b2");
    if (bottleneck) b3.buffers(out, p + ".b3");
    if (has_down) bdown.buffers(out, p + ".bdown");
  }
};

template <class T>
struct ResNet3d {
  ResNetBranchConfig cfg;
  nn::Conv3dLayer<T> stem;
  nn::BatchNormLayer<T> stem_bn;
  std::vector<ResBlock<T>> blocks;

  static ResNet3d init(const ResNetBranchConfig& cfg, Rng& rng) {
    cfg.validate();
    ResNet3d net;
    net.cfg = cfg;
    const std::int64_t w = cfg.base_width;
    net.stem = nn::Conv3dLayer<T>::init(cfg.in_channels, w, 7, 2, 3, rng);
    net.stem_bn = nn::BatchNormLayer<T>::init(w);
    static const int counts[4] = {3, 4, 6, 3};
    std::int64_t cin = w;
    for (int stage = 0; stage < 4; ++stage) {
      const std::int64_t width = w << stage;
      for (int i = 0; i < counts[stage]; ++i) {
        const std::int64_t stride = (stage > 0 && i == 0) ? 2 : 1;
        if (cfg.variant == 34) {
          net.blocks.push_back(ResBlock<T>::basic(cin, width, stride, rng));
          cin = width;
        } else {
          net.blocks.push_back(
              ResBlock<T>::bottleneck_block(cin, width, stride, rng));
          cin = width * 4;
        }
      }
    }
    return net;
  }

  // [N,C,D,H,W] -> [N, latent]
  nn::Tensor<T> forward(nn::Tensor<T> x, bool training) {
    nn::Tensor<T> h = nn::relu(stem_bn(stem(x), training));
    h = nn::maxpool3d(h, 3, 2, 1);
    for (auto& b : blocks) h = b.forward(h, training);
    return nn::global_avg_pool(h);
  }

  void params(nn::ParamList<T>& out, const std::string& p) {
    stem.params(out, p + ".stem");
    stem_bn.params(out, p + ".stem_bn");
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].params(out, p + ".block" + std::to_string(i));
  }
  void buffers(std::vector<std::pair<std::string, std::vector<T>*>>& out,
               const std::string& p) {
    stem_bn.buffers(out, p + ".stem_bn");
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].buffers(out, p + ".block" + std::to_string(i));
  }
};

}  // namespace cbctox::tox
