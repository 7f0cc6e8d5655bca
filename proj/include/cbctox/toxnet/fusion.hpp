#pragma once

// The multi-branch toxicity classifier: optional CBCT and Jacobian ResNet
// branches (separate weights), a 3-layer clinical MLP (64,128,256 with
// batchnorm, ReLU and 40% dropout per block), concatenation fusion and a
// single fully connected decision layer producing two softmaxed logits.

#include <optional>
#include <string>

#include "cbctox/cohort/clinical.hpp"
#include "cbctox/nn/checkpoint.hpp"
#include "cbctox/nn/layers.hpp"
#include "cbctox/nn/ops.hpp"
#include "cbctox/toxnet/resnet.hpp"

namespace cbctox::tox {

struct ClinicalBranchConfig {
  std::array<std::int64_t, 3> widths{64, 128, 256};
  double dropout = 0.40;
};

struct FusionConfig {
  bool use_cbct = false;
  bool use_jf = false;
  bool use_clinical = true;
  ResNetBranchConfig cbct_branch{34, 1, 64};
  ResNetBranchConfig jf_branch{50, 9, 64};
  ClinicalBranchConfig clinical;
  std::int64_t clinical_inputs = cohort::kClinicalVectorWidth;
  std::uint64_t seed = 0;

  void validate() const {
    require(use_cbct || use_jf || use_clinical, "domain",
            "fusion model needs at least one branch");
  }
  std::int64_t decision_input_width() const {
    std::int64_t w = 0;
    if (use_cbct) w += cbct_branch.latent_width();
    if (use_jf) w += jf_branch.latent_width();
    if (use_clinical) w += clinical.widths[2];
    return w;
  }
};

template <class T>
struct ClinicalMlp {
  std::array<nn::LinearLayer<T>, 3> fc;
  std::array<nn::BatchNormLayer<T>, 3> bn;
  double dropout_rate = 0.40;

  static ClinicalMlp init(std::int64_t inputs, const ClinicalBranchConfig& cfg,
                          Rng& rng) {
    ClinicalMlp m;
    m.dropout_rate = cfg.dropout;
    std::int64_t in = inputs;
    for (int i = 0; i < 3; ++i) {
      m.fc[std::size_t(i)] =
          nn::LinearLayer<T>::init(in, cfg.widths[std::size_t(i)], rng);
      m.bn[std::size_t(i)] =
          nn::BatchNormLayer<T>::init(cfg.widths[std::size_t(i)]);
      in = cfg.widths[std::size_t(i)];
    }
    return m;
  }

  nn::Tensor<T> forward(nn::Tensor<T> x, bool training, Rng& drop_rng) {
    nn::Tensor<T> h = x;
    for (int i = 0; i < 3; ++i) {
      h = nn::relu(bn[std::size_t(i)](fc[std::size_t(i)](h), training));
      h = nn::dropout(h, dropout_rate, drop_rng, training);
    }
    return h;
  }

  void params(nn::ParamList<T>& out, const std::string& p) {
    for (int i = 0; i < 3; ++i) {
      fc[std::size_t(i)].params(out, p + ".fc" + std::to_string(i));
      bn[std::size_t(i)].params(out, p + ".bn" + std::to_string(i));
    }
  }
  void buffers(std::vector<std::pair<std::string, std::vector<T>*>>& out,
               const std::string& p) {
    for (int i = 0; i < 3; ++i)
      bn[std::size_t(i)].buffers(out, p + ".bn" + std::to_string(i));
  }
};

template <class T>
struct FusionModel {
  FusionConfig cfg;
  std::optional<ResNet3d<T>> cbct_branch;
  std::optional<ResNet3d<T>> jf_branch;
  std::optional<ClinicalMlp<T>> clinical_branch;
  nn::LinearLayer<T> head;
  Rng dropout_rng{0};

  // inputs may be undefined tensors when the branch is disabled
  nn::Tensor<T> forward(nn::Tensor<T> cbct, nn::Tensor<T> jf,
                        nn::Tensor<T> clinical, nn::Tensor<T> mask,
                        bool training) {
    nn::Tensor<T> fused;
    auto append = [&](nn::Tensor<T> t) {
      fused = fused.defined() ? nn::concat_features(fused, t) : t;
    };
    if (cfg.use_cbct) {
      require(cbct.defined(), "shape", "fusion: CBCT branch input missing");
      nn::Tensor<T> in = mask.defined() ? nn::mul_mask(cbct, mask) : cbct;
      append(cbct_branch->forward(in, training));
    }
    if (cfg.use_jf) {
      require(jf.defined(), "shape", "fusion: Jacobian branch input missing");
      nn::Tensor<T> in = mask.defined() ? nn::mul_mask(jf, mask) : jf;
      append(jf_branch->forward(in, training));
    }
    if (cfg.use_clinical) {
      require(clinical.defined(), "shape",
              "fusion: clinical branch input missing");
      append(clinical_branch->forward(clinical, training, dropout_rng));
    }
    return head(fused);
  }

  nn::Tensor<T> probabilities(nn::Tensor<T> cbct, nn::Tensor<T> jf,
                              nn::Tensor<T> clinical, nn::Tensor<T> mask) {
    return nn::softmax(forward(cbct, jf, clinical, mask, false));
  }

  void params(nn::ParamList<T>& out) {
    if (cbct_branch) cbct_branch->params(out, "cbct");
    if (jf_branch) jf_branch->params(out, "jf");
    if (clinical_branch) clinical_branch->params(out, "clinical");
    head.params(out, "head");
  }
  void buffers(std::vector<std::pair<std::string, std::vector<T>*>>& out) {
    if (cbct_branch) cbct_branch->buffers(out, "cbct");
    if (jf_branch) jf_branch->buffers(out, "jf");
    if (clinical_branch) clinical_branch->buffers(out, "clinical");
  }

  std::int64_t parameter_count() {
    nn::ParamList<T> p;
    params(p);
    std::int64_t n = 0;
    for (auto& [name, t] : p) n += t.numel();
    return n;
  }
};

template <class T>
FusionModel<T> build_model(const FusionConfig& cfg) {
  cfg.validate();
  FusionModel<T> m;
  m.cfg = cfg;
  Rng rng(cfg.seed ^ 0xf051ull);
  if (cfg.use_cbct) m.cbct_branch = ResNet3d<T>::init(cfg.cbct_branch, rng);
  if (cfg.use_jf) m.jf_branch = ResNet3d<T>::init(cfg.jf_branch, rng);
  if (cfg.use_clinical)
    m.clinical_branch =
        ClinicalMlp<T>::init(cfg.clinical_inputs, cfg.clinical, rng);
  m.head = nn::LinearLayer<T>::init(cfg.decision_input_width(), 2, rng);
  m.dropout_rng = rng.split(0xd0);
  return m;
}

// Inverse-frequency class weights normalized to unit expected per-sample
// weight: w_c = (1/freq_c) / sum_d freq_d*(1/freq_d) = 1/(2*freq_c).
std::array<double, 2> class_weights(const std::vector<int>& labels);

}  // namespace cbctox::tox
