#pragma once

// Classifier training: weighted cross-entropy (inverse toxicity frequency
// from the training labels), Adam with the one-cycle policy, per-epoch
// validation metrics, best-validation-bAcc checkpoint restoration and a
// CSV-ready history.

#include <filesystem>
#include <vector>

#include "cbctox/toxnet/fusion.hpp"
#include "cbctox/volume.hpp"

namespace cbctox::tox {

struct Sample {
  Volume cbct;       // single channel; may be empty when unused
  Volume jf;         // 9 (matrix) or 1 (determinant) channels
  Volume mask;       // single channel {0,1}; empty = no masking
  std::array<double, cohort::kClinicalVectorWidth> clinical{};
  int label = 0;
};

struct ClassifierTrainConfig {
  int epochs = 100;
  int batch = 8;
  double lr = 7e-4;
  std::uint64_t seed = 0;
};

struct HistoryRow {
  int epoch = 0;
  double loss = 0;
  double lr = 0;
  double val_bacc = 0, val_sens = 0, val_spec = 0;
};

struct TrainResult {
  FusionModel<float> model;
  std::vector<HistoryRow> history;
  std::array<double, 2> weights{1, 1};
  double best_val_bacc = 0;
};

TrainResult train_classifier(const std::vector<Sample>& train,
                             const std::vector<Sample>& val,
                             const FusionConfig& cfg,
                             const ClassifierTrainConfig& tcfg);

// P(label = 1) per sample, eval mode
std::vector<double> predict_proba(FusionModel<float>& model,
                                  const std::vector<Sample>& samples,
                                  int batch = 8);

void write_history_csv(const std::vector<HistoryRow>& history,
                       const std::filesystem::path& path);

}  // namespace cbctox::tox
