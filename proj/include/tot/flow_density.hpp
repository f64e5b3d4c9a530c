#pragma once

#include <cstdint>
#include <vector>

#include "tot/model.hpp"

namespace tot {

// Scalar-latent utilities for checking that a learned latent flow defines a
// normalized conditional density p(z_t | z_{t-1}) = N(r(z_t, z_{t-1})) *
// |dr/dz_t| (guarded).
double flow_conditional_density(const TotModel& m, double z_prev, double z_curr);

// Composite trapezoid rule over [lo, hi] with `points` nodes.
double trapezoid_flow_mass(const TotModel& m, double z_prev, double lo,
                           double hi, int points);

struct Flow1dTrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 11;

  void validate() const;
};

// Maximum-likelihood fit of the model's single latent flow on consecutive
// pairs of the given series; touches only the rz parameters.
void train_flow_1d(TotModel& m, const std::vector<double>& z_series,
                   const Flow1dTrainConfig& cfg);

}  // namespace tot
