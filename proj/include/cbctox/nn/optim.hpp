#pragma once

// Adam with bias correction plus the one-cycle learning-rate policy
// (cosine ramp to max_lr over the first pct_start of training, cosine anneal
// down to max_lr/final_div_factor afterwards).

#include <cmath>
#include <string>
#include <vector>

#include "cbctox/kern/kernels.hpp"
#include "cbctox/nn/tensor.hpp"

namespace cbctox::nn {

struct TrainSchedule {
  double max_lr = 1e-3;
  std::int64_t total_steps = 1;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;

  void validate() const {
    require(total_steps >= 1, "domain", "schedule: total_steps must be >= 1");
    require(pct_start > 0.0 && pct_start < 1.0, "domain",
            "schedule: pct_start must be in (0,1)");
    require(div_factor > 1.0 && final_div_factor > 1.0, "domain",
            "schedule: div factors must be > 1");
  }
};

inline double onecycle_lr(const TrainSchedule& s, std::int64_t step) {
  s.validate();
  require(step >= 0 && step < s.total_steps, "domain",
          "onecycle_lr: step out of range");
  const double pi = std::acos(-1.0);
  const double initial = s.max_lr / s.div_factor;
  const double final_lr = s.max_lr / s.final_div_factor;
  const std::int64_t up = std::llround(s.pct_start * double(s.total_steps));
  if (step <= up && up > 0) {
    const double t = double(step) / double(up);
    return initial + (s.max_lr - initial) * (1.0 - std::cos(pi * t)) / 2.0;
  }
  const std::int64_t down = s.total_steps - 1 - up;
  if (down <= 0) return final_lr;
  const double t = double(step - up) / double(down);
  return final_lr + (s.max_lr - final_lr) * (1.0 + std::cos(pi * t)) / 2.0;
}

template <class T>
class Adam {
 public:
  explicit Adam(ParamList<T> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, p] : params) {
      slots_.push_back(Slot{p, std::vector<T>(std::size_t(p.numel()), T(0)),
                            std::vector<T>(std::size_t(p.numel()), T(0))});
      (void)name;
    }
  }

  void zero_grad() {
    for (auto& s : slots_) s.p.zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (auto& s : slots_) {
      if (s.p.grad_vector().empty()) continue;  // no grad this pass
      kern::adam_update(s.p.data(), s.p.grad_vector().data(), s.m.data(),
                        s.v.data(), std::size_t(s.p.numel()),
                        T(lr / bc1), T(beta1_), T(beta2_), T(eps_),
                        T(1.0 / bc2));
    }
  }

  std::int64_t steps_taken() const { return t_; }

 private:
  struct Slot {
    Tensor<T> p;
    std::vector<T> m, v;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace cbctox::nn
