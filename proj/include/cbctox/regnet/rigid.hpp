#pragma once

// Rigid pre-alignment: 6-parameter (Euler ZYX + translation) NCC
// maximization over a 4-level Gaussian pyramid, center-of-mass initialized,
// Adam on the parameters with central-difference gradients.

#include "cbctox/field.hpp"
#include "cbctox/volume.hpp"

#include <string>

namespace cbctox::reg {

struct RegistrationReport {
  double final_loss = 0;
  double ncc_value = 0;
  double initial_ncc = 0;
  double deformed_fraction = 0;
  std::int64_t iterations = 0;
  std::int64_t epochs = 0;
  double wall_seconds = 0;
  std::string engine;
};

struct RigidConfig {
  int levels = 4;
  int iters_per_level = 60;
  double lr = 0.5;             // Adam step in scaled units (mm)
  double angle_scale = 0.02;   // radians per scaled unit
  double fd_step_trans_vox = 0.25;  // FD step, fraction of level spacing
  double fd_step_angle = 2e-3;      // radians
};

// Returns a transform t such that apply_rigid(moving, t) aligns to fixed.
RigidTransform rigid_register(const Volume& fixed, const Volume& moving,
                              RegistrationReport& report,
                              const RigidConfig& cfg = {});

}  // namespace cbctox::reg
