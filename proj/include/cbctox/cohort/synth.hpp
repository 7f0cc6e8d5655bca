#pragma once

// Synthetic data: a deformable head phantom (ellipsoidal head, skull shell,
// internal structures) warped by sums of Gaussian displacement bumps, with
// CBCT appearance simulation (intensity shift, low-frequency bias field,
// Gaussian noise), boundary landmarks with ground-truth correspondences,
// and a cohort generator whose labels are driven by the regional volume
// change of the ground-truth deformation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cbctox/cohort/clinical.hpp"
#include "cbctox/field.hpp"
#include "cbctox/volume.hpp"

namespace cbctox::cohort {

struct PhantomConfig {
  std::uint64_t seed = 1;
  double deformation_mm = 8.0;
  std::array<std::int64_t, 3> grid{64, 64, 64};
  double spacing_mm = 2.0;
  std::vector<int> fractions{1, 5, 10, 15, 20, 25, 30};
  int landmarks = 4;
  double noise_sigma = 0.02;
  double bias_amplitude = 0.04;
};

struct FractionData {
  int fraction = 0;
  Volume cbct;
  DisplacementField gt_dvf;  // on the cbct grid, maps into pCT space (mm)
  std::vector<LandmarkPair> landmarks;
};

struct Phantom {
  Volume pct;
  std::vector<FractionData> fractions;
};

Phantom synth_phantom(const PhantomConfig& cfg);

// ---- cohort -----------------------------------------------------------------

struct EffectConfig {
  std::string toxicity = "ng_tube";
  double strength = 10.0;
  double prevalence = 0.30;
  // "linear": regional deformation grows with t; "constant": present from
  // the first fraction at full size
  std::string time_profile = "linear";
  double nuisance_mm = 1.0;  // per-fraction random deformation, label-free
};

struct CohortConfig {
  int n = 40;
  std::uint64_t seed = 1;
  std::array<std::int64_t, 3> grid{32, 32, 32};
  double spacing_mm = 2.0;
  double deformation_mm = 10.0;
  std::vector<int> fractions{5, 10, 15, 20, 25, 30};
  EffectConfig effect;
  double noise_sigma = 0.02;
  double bias_amplitude = 0.04;
};

struct PatientOracle {
  std::string id;
  double regional_volume_change = 0;  // mean(det J - 1) in the region
  double z = 0;                       // cohort z-score of the above
  double p_label = 0;                 // P(label = 1)
  int label = 0;
};

struct CohortPlan {
  CohortConfig cfg;
  std::vector<PatientRecord> records;  // paths empty until written
  std::vector<PatientOracle> oracle;
  double z_threshold = 0;  // (1 - prevalence) quantile used in the sigmoid
  std::array<double, 3> region_center_mm{0, 0, 0};
  double region_radius_mm = 0;
};

// Deterministic planning pass: anatomy/deformation parameters, regional
// volume changes, z-scores, labels and clinical covariates. Volumes are not
// rasterized here.
CohortPlan plan_cohort(const CohortConfig& cfg);

struct PatientBundle {
  PatientRecord record;
  Phantom phantom;
};

// Rasterizes one planned patient (images, ground-truth DVFs, landmarks).
PatientBundle generate_patient(const CohortPlan& plan, int index);

// landmark CSV (mm coordinates)
void write_landmarks(const std::vector<LandmarkPair>& lm,
                     const std::filesystem::path& path);
std::vector<LandmarkPair> read_landmarks(const std::filesystem::path& path);

void write_oracle(const CohortPlan& plan, const std::filesystem::path& path);

}  // namespace cbctox::cohort
