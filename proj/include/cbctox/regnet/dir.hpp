#pragma once

// Deformable registration engines. Both optimize the same objective
// (-NCC + lambda * L2 gradient penalty):
//   - train_dir / predict_dvf: amortized UNet (fixed+moving in, DVF out),
//   - direct_field_register: per-pair multi-resolution descent on the DVF.
// two_stage_* chain rigid alignment, the modality stage and the anatomy
// stage, compose the fields and extract the Jacobian.

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "cbctox/field.hpp"
#include "cbctox/regnet/rigid.hpp"
#include "cbctox/regnet/unet.hpp"
#include "cbctox/volume.hpp"

namespace cbctox::reg {

enum class Stage { modality, anatomy };
const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name);

// default regularization per stage: 1.0 for modality, 0.5 for anatomy
double default_lambda(Stage s);

struct DirModel {
  UNet<float> net;
  Stage stage = Stage::modality;
  double lambda = 1.0;
  std::array<std::int64_t, 3> grid_dims{0, 0, 0};
  std::array<double, 3> spacing_mm{1, 1, 1};

  void save(const std::filesystem::path& dir) const;
  static DirModel load(const std::filesystem::path& dir);
};

struct DirTrainConfig {
  int epochs = 100;
  int batch = 7;
  double split_train = 0.70, split_val = 0.15, split_test = 0.15;
  double max_lr = 1e-3;
  int patience = 10;
  std::uint64_t seed = 0;
};

// pairs are (fixed, moving) on a shared grid
DirModel train_dir(const std::vector<std::pair<Volume, Volume>>& pairs,
                   double lambda, Stage stage, const DirTrainConfig& cfg,
                   RegistrationReport& report);

DisplacementField predict_dvf(const DirModel& model, const Volume& fixed,
                              const Volume& moving);

struct DirectFieldConfig {
  int levels = 3;
  std::array<int, 3> iters{120, 80, 40};  // coarse to fine
  double lr_mm = 1.0;                     // Adam step at the coarsest level
  double level_lr_decay = 0.5;
};

DisplacementField direct_field_register(const Volume& fixed,
                                        const Volume& moving, double lambda,
                                        RegistrationReport& report,
                                        const DirectFieldConfig& cfg = {});

struct TwoStageResult {
  Volume aligned_ct;
  DisplacementField composed;
  JacobianField jf;
  RegistrationReport stage_a, stage_b;
  double deformed_fraction_value = 0;
};

// Model-based path (test-time layout: CBCT_0 is not an input; both stages
// see cbct_t as the fixed image).
TwoStageResult two_stage_apply(const DirModel& model_a, const DirModel& model_b,
                               const Volume& pct, const Volume& cbct_t,
                               const RigidTransform& rigid);

// Direct-engine path mirroring the training-time layout (stage 1 registers
// the aligned CT to cbct_0).
TwoStageResult two_stage_direct(const Volume& pct, const Volume& cbct_0,
                                const Volume& cbct_t,
                                const RigidTransform& rigid,
                                double lambda_a = 1.0, double lambda_b = 0.5,
                                const DirectFieldConfig& cfg = {});

}  // namespace cbctox::reg
