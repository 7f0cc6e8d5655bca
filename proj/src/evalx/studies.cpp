#include "cbctox/evalx/studies.hpp"

#include <algorithm>
#include <numeric>

#include "cbctox/error.hpp"
#include "cbctox/preprocess.hpp"
#include "cbctox/rng.hpp"

namespace cbctox::evalx {

std::string BranchCombo::name() const {
  std::string s;
  auto add = [&](const char* part) {
    if (!s.empty()) s += "+";
    s += part;
  };
  if (cbct) add("cbct");
  if (jf) add("jf");
  if (clinical) add("clinical");
  return s.empty() ? "none" : s;
}

std::vector<tox::Sample> build_samples(const std::vector<PatientData>& patients,
                                       int fraction, const BranchCombo& combo,
                                       const StudyConfig& cfg) {
  std::vector<tox::Sample> out;
  for (const auto& p : patients) {
    tox::Sample s;
    s.label = p.record.labels.get(cfg.toxicity) ? 1 : 0;
    const auto enc = cohort::encode_clinical(p.record);
    s.clinical = enc;
    const bool needs_images = combo.cbct || combo.jf;
    if (needs_images) {
      const auto cb = p.cbct.find(fraction);
      require(cb != p.cbct.end(), "domain",
              p.record.id + ": no CBCT at fraction " +
                  std::to_string(fraction));
      if (combo.cbct) s.cbct = cb->second;
      if (combo.jf) {
        const auto dv = p.dvf.find(fraction);
        require(dv != p.dvf.end(), "domain",
                p.record.id + ": no DVF at fraction " +
                    std::to_string(fraction));
        const JacobianField full = jacobian_field(dv->second);
        if (cfg.jf_channels == 9) {
          s.jf = full.f;
        } else {
          require(cfg.jf_channels == 1, "domain",
                  "jf_channels must be 9 (matrix) or 1 (determinant)");
          s.jf = jacobian_determinant(full);
        }
      }
      if (cfg.use_mask) s.mask = adaptive_mask(cb->second).vol;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

tox::FusionConfig fusion_config(const BranchCombo& combo,
                                const StudyConfig& cfg, std::uint64_t seed) {
  tox::FusionConfig fc;
  fc.use_cbct = combo.cbct;
  fc.use_jf = combo.jf;
  fc.use_clinical = combo.clinical;
  fc.cbct_branch = {cfg.resnet_variant, 1, cfg.base_width};
  fc.jf_branch = {cfg.resnet_variant, cfg.jf_channels, cfg.base_width};
  fc.seed = seed;
  return fc;
}

// stratified inner split of the training indices for checkpoint selection
void carve_validation(const std::vector<std::size_t>& train_idx,
                      const std::vector<int>& labels, double val_fraction,
                      std::uint64_t seed, std::vector<std::size_t>& train_out,
                      std::vector<std::size_t>& val_out) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i : train_idx) (labels[i] ? pos : neg).push_back(i);
  Rng rng(seed ^ 0xca47eull);
  rng.shuffle(pos.data(), pos.size());
  rng.shuffle(neg.data(), neg.size());
  const std::size_t vpos = std::min(
      pos.size() > 1 ? pos.size() - 1 : std::size_t(0),
      std::size_t(std::llround(val_fraction * double(pos.size()))));
  const std::size_t vneg_raw =
      std::size_t(std::llround(val_fraction * double(neg.size())));
  // validation bAcc needs both classes
  const std::size_t vneg =
      std::min(neg.size() > 1 ? neg.size() - 1 : std::size_t(0),
               std::max<std::size_t>(vneg_raw, 1));
  const std::size_t vpos_eff = std::max<std::size_t>(
      vpos, pos.size() > 1 ? 1 : 0);
  train_out.clear();
  val_out.clear();
  for (std::size_t i = 0; i < pos.size(); ++i)
    (i < vpos_eff ? val_out : train_out).push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i)
    (i < vneg ? val_out : train_out).push_back(neg[i]);
  std::sort(train_out.begin(), train_out.end());
  std::sort(val_out.begin(), val_out.end());
}

MetricsReport run_cv(const std::vector<tox::Sample>& samples,
                     const std::vector<std::vector<std::size_t>>& folds,
                     const BranchCombo& combo, const StudyConfig& cfg) {
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);

  std::vector<FoldMetrics> fold_metrics;
  for (std::size_t fold = 0; fold < folds.size(); ++fold) {
    std::vector<std::size_t> train_idx;
    for (std::size_t other = 0; other < folds.size(); ++other)
      if (other != fold)
        train_idx.insert(train_idx.end(), folds[other].begin(),
                         folds[other].end());
    std::vector<std::size_t> inner_train, inner_val;
    carve_validation(train_idx, labels, cfg.val_fraction,
                     cfg.seed + fold * 1009 + 1, inner_train, inner_val);

    std::vector<tox::Sample> train_s, val_s, test_s;
    for (std::size_t i : inner_train) train_s.push_back(samples[i]);
    for (std::size_t i : inner_val) val_s.push_back(samples[i]);
    for (std::size_t i : folds[fold]) test_s.push_back(samples[i]);

    tox::ClassifierTrainConfig tcfg;
    tcfg.epochs = cfg.epochs;
    tcfg.batch = cfg.batch;
    tcfg.lr = cfg.lr;
    tcfg.seed = cfg.seed * 31 + fold;
    tox::TrainResult tr = tox::train_classifier(
        train_s, val_s, fusion_config(combo, cfg, tcfg.seed), tcfg);

    const std::vector<double> p1 =
        tox::predict_proba(tr.model, test_s, cfg.batch);
    std::vector<int> preds, test_labels;
    for (std::size_t i = 0; i < test_s.size(); ++i) {
      preds.push_back(p1[i] > 0.5 ? 1 : 0);
      test_labels.push_back(test_s[i].label);
    }
    fold_metrics.push_back(confusion_metrics(preds, test_labels));
  }
  return MetricsReport::aggregate(std::move(fold_metrics));
}

std::vector<std::vector<std::size_t>> study_folds(
    const std::vector<PatientData>& patients, const StudyConfig& cfg) {
  std::vector<int> labels;
  for (const auto& p : patients)
    labels.push_back(p.record.labels.get(cfg.toxicity) ? 1 : 0);
  return kfold_split(patients.size(), cfg.folds, cfg.seed, &labels);
}

}  // namespace

AblationResult ablation_study(const std::vector<PatientData>& patients,
                              const std::vector<BranchCombo>& combos,
                              int fraction, const StudyConfig& cfg) {
  require(!patients.empty(), "domain", "ablation_study: empty cohort");
  const auto folds = study_folds(patients, cfg);

  AblationResult result;
  result.fold_assignment_hash = fold_hash(folds);
  for (const auto& combo : combos) {
    const auto samples = build_samples(patients, fraction, combo, cfg);
    AblationRow row;
    row.combo = combo;
    row.report = run_cv(samples, folds, combo, cfg);
    result.rows.push_back(std::move(row));
  }
  return result;
}

EvolutionTable risk_evolution(const std::vector<PatientData>& patients,
                              const std::vector<int>& fractions,
                              const StudyConfig& cfg) {
  require(!fractions.empty(), "domain", "risk_evolution: empty fraction set");
  const auto folds = study_folds(patients, cfg);

  EvolutionTable table;
  table.fold_assignment_hash = fold_hash(folds);

  // fraction 0: clinical-only baseline on the same folds
  {
    const BranchCombo combo{false, false, true};
    const auto samples = build_samples(patients, 0, combo, cfg);
    const MetricsReport rep = run_cv(samples, folds, combo, cfg);
    table.rows.push_back({0, rep.mean_bacc, rep.std_bacc});
  }
  const BranchCombo combo{false, true, true};
  std::vector<double> xs, ys;
  for (const int t : fractions) {
    const auto samples = build_samples(patients, t, combo, cfg);
    const MetricsReport rep = run_cv(samples, folds, combo, cfg);
    table.rows.push_back({t, rep.mean_bacc, rep.std_bacc});
    xs.push_back(double(t));
    ys.push_back(rep.mean_bacc);
  }
  table.fit = linear_fit_r2(xs, ys);
  table.correlated = table.fit.r2 >= 0.9;
  return table;
}

}  // namespace cbctox::evalx
