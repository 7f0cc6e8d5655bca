#pragma once

// Parameterized layer modules. Weights initialize Kaiming-uniform over
// fan-in, biases to zero, batchnorm to gamma=1/beta=0; every module
// registers its tensors (and stat buffers) under a dotted name prefix so
// checkpoints are stable.

#include <cmath>
#include <string>

#include "cbctox/nn/ops.hpp"
#include "cbctox/nn/tensor.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::nn {

template <class T>
Tensor<T> kaiming_uniform(std::vector<std::int64_t> shape,
                          std::int64_t fan_in, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
  const double bound = std::sqrt(6.0 / double(fan_in));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = T(rng.uniform(-bound, bound));
  return t;
}

template <class T>
struct Conv3dLayer {
  Tensor<T> weight, bias;
  std::int64_t stride = 1, pad = 0;

  static Conv3dLayer init(std::int64_t cin, std::int64_t cout,
                          std::int64_t kernel, std::int64_t stride,
                          std::int64_t pad, Rng& rng) {
    Conv3dLayer l;
    l.weight = kaiming_uniform<T>({cout, cin, kernel, kernel, kernel},
                                  cin * kernel * kernel * kernel, rng);
    l.bias = Tensor<T>::zeros({cout}, true);
    l.stride = stride;
    l.pad = pad;
    return l;
  }

  Tensor<T> operator()(Tensor<T> x) const {
    return conv3d(x, weight, bias, stride, pad);
  }

  void params(ParamList<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <class T>
struct LinearLayer {
  Tensor<T> weight, bias;

  static LinearLayer init(std::int64_t fin, std::int64_t fout, Rng& rng) {
    LinearLayer l;
    l.weight = kaiming_uniform<T>({fout, fin}, fin, rng);
    l.bias = Tensor<T>::zeros({fout}, true);
    return l;
  }

  Tensor<T> operator()(Tensor<T> x) const { return linear(x, weight, bias); }

  void params(ParamList<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

template <class T>
struct BatchNormLayer {
  Tensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;

  static BatchNormLayer init(std::int64_t channels) {
    BatchNormLayer l;
    l.gamma = Tensor<T>::filled({channels}, T(1), true);
    l.beta = Tensor<T>::zeros({channels}, true);
    l.running_mean.assign(std::size_t(channels), T(0));
    l.running_var.assign(std::size_t(channels), T(1));
    return l;
  }

  Tensor<T> operator()(Tensor<T> x, bool training) {
    return batchnorm(x, gamma, beta, running_mean, running_var, training);
  }

  void params(ParamList<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
  // running stats persist in checkpoints but receive no gradients
  void buffers(std::vector<std::pair<std::string, std::vector<T>*>>& out,
               const std::string& prefix) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
  }
};

}  // namespace cbctox::nn
