#pragma once

// Study runners: branch-combination ablation and the risk-evolution curve.
// Both run stratified 5-fold cross-validation with identical folds across
// rows, carve 15% of each training fold for checkpoint selection, and
// report fold-wise mean +/- std metrics.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbctox/cohort/clinical.hpp"
#include "cbctox/evalx/metrics.hpp"
#include "cbctox/field.hpp"
#include "cbctox/toxnet/train.hpp"
#include "cbctox/volume.hpp"

namespace cbctox::evalx {

struct PatientData {
  cohort::PatientRecord record;
  std::map<int, Volume> cbct;            // by fraction
  std::map<int, DisplacementField> dvf;  // by fraction (composed pCT->CBCT_t)
};

struct BranchCombo {
  bool cbct = false, jf = false, clinical = false;
  std::string name() const;
};

struct StudyConfig {
  std::string toxicity = "ng_tube";
  int folds = 5;
  std::uint64_t seed = 0;
  int epochs = 20;
  int batch = 8;
  double lr = 7e-4;
  int resnet_variant = 50;   // Jacobian/CBCT branch capacity
  int jf_channels = 9;       // 9 = full matrix, 1 = determinant
  std::int64_t base_width = 64;
  double val_fraction = 0.15;  // carved from each training fold
  bool use_mask = true;
};

struct AblationRow {
  BranchCombo combo;
  MetricsReport report;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::uint64_t fold_assignment_hash = 0;
};

AblationResult ablation_study(const std::vector<PatientData>& patients,
                              const std::vector<BranchCombo>& combos,
                              int fraction, const StudyConfig& cfg);

struct EvolutionRow {
  int fraction = 0;  // 0 = clinical-only baseline
  double mean_bacc = 0, std_bacc = 0;
};

struct EvolutionTable {
  std::vector<EvolutionRow> rows;
  LineFit fit;       // over the deformation fractions (t > 0)
  bool correlated = false;  // r^2 >= 0.9
  std::uint64_t fold_assignment_hash = 0;
};

EvolutionTable risk_evolution(const std::vector<PatientData>& patients,
                              const std::vector<int>& fractions,
                              const StudyConfig& cfg);

// Per-fraction samples for one combination (Jacobian computed from the
// stored DVF, mask from the CBCT). Exposed for the CLI tox-train command.
std::vector<tox::Sample> build_samples(const std::vector<PatientData>& patients,
                                       int fraction, const BranchCombo& combo,
                                       const StudyConfig& cfg);

}  // namespace cbctox::evalx
