#include "cbctox/evalx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbctox/error.hpp"
#include "cbctox/interp.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::evalx {

FoldMetrics confusion_metrics(const std::vector<int>& predictions,
                              const std::vector<int>& labels) {
  require(predictions.size() == labels.size(), "shape",
          "confusion_metrics: length mismatch");
  std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "domain",
            "confusion_metrics: labels must be 0/1");
    require(predictions[i] == 0 || predictions[i] == 1, "domain",
            "confusion_metrics: predictions must be 0/1");
    if (labels[i] == 1)
      predictions[i] ? ++tp : ++fn;
    else
      predictions[i] ? ++fp : ++tn;
  }
  require(tp + fn > 0 && tn + fp > 0, "domain",
          "confusion_metrics: labels must contain both classes");
  FoldMetrics m;
  m.sensitivity = double(tp) / double(tp + fn);
  m.specificity = double(tn) / double(tn + fp);
  m.bacc = (m.sensitivity + m.specificity) / 2.0;
  return m;
}

MetricsReport MetricsReport::aggregate(std::vector<FoldMetrics> folds) {
  MetricsReport r;
  r.folds = std::move(folds);
  const double n = double(r.folds.size());
  require(n > 0, "domain", "aggregate: no folds");
  auto stats = [&](auto get, double& mean, double& sd) {
    mean = 0;
    for (const auto& f : r.folds) mean += get(f);
    mean /= n;
    double v = 0;
    for (const auto& f : r.folds) v += (get(f) - mean) * (get(f) - mean);
    sd = std::sqrt(v / n);
  };
  stats([](const FoldMetrics& f) { return f.bacc; }, r.mean_bacc, r.std_bacc);
  stats([](const FoldMetrics& f) { return f.sensitivity; }, r.mean_sens,
        r.std_sens);
  stats([](const FoldMetrics& f) { return f.specificity; }, r.mean_spec,
        r.std_spec);
  return r;
}

std::vector<std::vector<std::size_t>> kfold_split(
    std::size_t n, int k, std::uint64_t seed,
    const std::vector<int>* stratify_labels) {
  require(k >= 2, "domain", "kfold_split: k must be >= 2");
  require(n >= std::size_t(k), "domain", "kfold_split: n < k");
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  Rng rng(seed ^ 0xf01d5ull);

  if (!stratify_labels) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.data(), idx.size());
    for (std::size_t i = 0; i < n; ++i)
      folds[i % std::size_t(k)].push_back(idx[i]);
    return folds;
  }

  require(stratify_labels->size() == n, "shape",
          "kfold_split: label count mismatch");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i)
    ((*stratify_labels)[i] ? pos : neg).push_back(i);
  require(pos.size() >= std::size_t(k) && neg.size() >= std::size_t(k),
          "domain", "kfold_split: a class is too small to stratify");
  rng.shuffle(pos.data(), pos.size());
  rng.shuffle(neg.data(), neg.size());
  // positives round-robin, negatives continue where they left off so total
  // sizes stay within one of each other
  for (std::size_t i = 0; i < pos.size(); ++i)
    folds[i % std::size_t(k)].push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i)
    folds[(pos.size() + i) % std::size_t(k)].push_back(neg[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::uint64_t fold_hash(const std::vector<std::vector<std::size_t>>& folds) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& f : folds) {
    mix(0xfeedull);
    for (std::size_t i : f) mix(i);
  }
  return h;
}

std::pair<double, double> tre(const std::vector<LandmarkPair>& landmarks,
                              const DisplacementField& dvf) {
  require(!landmarks.empty(), "domain", "tre: no landmarks");
  const Volume& f = dvf.f;
  std::vector<double> errs;
  for (const auto& lm : landmarks) {
    const auto vc = f.to_voxel(lm.fixed_mm);
    require(vc[0] >= 0 && vc[0] <= double(f.nx() - 1) && vc[1] >= 0 &&
                vc[1] <= double(f.ny() - 1) && vc[2] >= 0 &&
                vc[2] <= double(f.nz() - 1),
            "domain", "tre: landmark outside the DVF grid");
    const auto tap =
        trilinear_tap<double>(f.nx(), f.ny(), f.nz(), vc[0], vc[1], vc[2]);
    double d2 = 0;
    for (int c = 0; c < 3; ++c) {
      const double u = sample_tap(f.channel(c), tap);
      const double d = lm.fixed_mm[std::size_t(c)] + u -
                       lm.moving_mm[std::size_t(c)];
      d2 += d * d;
    }
    errs.push_back(std::sqrt(d2));
  }
  double mean = 0;
  for (double e : errs) mean += e;
  mean /= double(errs.size());
  double var = 0;
  for (double e : errs) var += (e - mean) * (e - mean);
  return {mean, std::sqrt(var / double(errs.size()))};
}

LineFit linear_fit_r2(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "shape", "linear_fit_r2: length mismatch");
  require(xs.size() >= 3, "domain", "linear_fit_r2: need at least 3 points");
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0, "domain", "linear_fit_r2: xs are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy <= 0) {
    fit.r2 = 0.0;  // constant ys: no variance to explain
    return fit;
  }
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = 1.0 - ss_res / syy;
  return fit;
}

}  // namespace cbctox::evalx
