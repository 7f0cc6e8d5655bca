#pragma once

// Evaluation primitives: confusion-matrix metrics (bAcc is exactly the mean
// of sensitivity and specificity per fold), stratified k-fold splitting,
// target registration error through a DVF, and least-squares line fitting
// with the r^2 >= 0.9 correlation gate.

#include <cstdint>
#include <string>
#include <vector>

#include "cbctox/field.hpp"

namespace cbctox::evalx {

struct FoldMetrics {
  double bacc = 0, sensitivity = 0, specificity = 0;
};

struct MetricsReport {
  std::vector<FoldMetrics> folds;
  double mean_bacc = 0, std_bacc = 0;
  double mean_sens = 0, std_sens = 0;
  double mean_spec = 0, std_spec = 0;

  static MetricsReport aggregate(std::vector<FoldMetrics> folds);
};

FoldMetrics confusion_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& labels);

// Stratified when labels are provided: per-fold positive counts differ by
// <= 1 and fold sizes differ by <= 1. Deterministic in the seed.
std::vector<std::vector<std::size_t>> kfold_split(
    std::size_t n, int k, std::uint64_t seed,
    const std::vector<int>* stratify_labels = nullptr);

std::uint64_t fold_hash(const std::vector<std::vector<std::size_t>>& folds);

// mean/std over landmarks of | fixed + u(fixed) - moving | in mm; u sampled
// trilinearly at the fixed landmark. Landmarks must be inside the grid.
std::pair<double, double> tre(const std::vector<LandmarkPair>& landmarks,
                              const DisplacementField& dvf);

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

// least squares; constant ys give r^2 = 0 by convention; constant xs error
LineFit linear_fit_r2(const std::vector<double>& xs,
                      const std::vector<double>& ys);

}  // namespace cbctox::evalx
