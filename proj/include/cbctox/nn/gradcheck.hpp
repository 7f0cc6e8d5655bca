#pragma once

// Central-difference gradient verification. Rebuilds the loss via the
// supplied closure, perturbing a deterministic sample of coordinates per
// checked tensor, and reports the worst relative error. Runs in double.

#include <cmath>
#include <functional>
#include <vector>

#include "cbctox/nn/tensor.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::nn {

struct GradcheckOptions {
  double h_rel = 1e-5;
  int max_coords_per_tensor = 24;
  std::uint64_t seed = 0x9e3779b9;
};

// make_loss() must rebuild the graph from the current contents of `inputs`
// and return the scalar loss.
inline double gradcheck(const std::function<Tensor<double>()>& make_loss,
                        std::vector<Tensor<double>> inputs,
                        const GradcheckOptions& opt = {}) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor<double> loss = make_loss();
  require(std::isfinite(loss.item()), "domain", "gradcheck: non-finite loss");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    t.grad();  // ensure allocated even if untouched
    analytic.push_back(t.grad_vector());
  }

  Rng rng(opt.seed);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor<double>& t = inputs[ti];
    const std::int64_t n = t.numel();
    std::vector<std::int64_t> coords;
    if (n <= opt.max_coords_per_tensor) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < opt.max_coords_per_tensor; ++i)
        coords.push_back(std::int64_t(rng.below(std::uint64_t(n))));
    }
    for (std::int64_t c : coords) {
      const double x0 = t.data()[c];
      const double h = opt.h_rel * std::max(1.0, std::abs(x0));
      t.data()[c] = x0 + h;
      const double fp = make_loss().item();
      t.data()[c] = x0 - h;
      const double fm = make_loss().item();
      t.data()[c] = x0;
      require(std::isfinite(fp) && std::isfinite(fm), "domain",
              "gradcheck: non-finite perturbed loss");
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[ti][std::size_t(c)];
      const double err =
          std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1.0});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cbctox::nn
