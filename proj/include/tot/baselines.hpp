#pragma once

#include <cstdint>

#include "tot/eval.hpp"
#include "tot/mlp.hpp"
#include "tot/synthgen.hpp"

namespace tot {

// Direct window-to-forecast regressors with identical capacity, differing
// only in what they see beside the observation history: nothing, the true
// future latents, or pure noise in place of the latents (control).
enum class ForecastRegime { x_only, x_true_z, x_noise_z };

struct DirectForecastConfig {
  int t_in = 8;
  int horizon = 4;
  int width = 64;
  int epochs = 8;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double grad_clip = 5.0;
  std::uint64_t seed = 7;
  int windows_per_epoch = 0;

  void validate() const;
};

struct DirectForecaster {
  ForecastRegime regime = ForecastRegime::x_only;
  DirectForecastConfig cfg;
  MlpSpec spec;
  ParamStore params;
};

DirectForecaster train_direct_forecaster(const Dataset& ds, ForecastRegime regime,
                                         const DirectForecastConfig& cfg);

// Mean forecast MSE over every validation window (stride 1), matching the
// protocol of validation_forecast_mse.
double direct_forecaster_mse(const DirectForecaster& f, const Dataset& ds);

struct BaselineReport {
  double mse_x_only = 0.0;
  double mse_oracle = 0.0;  // true future latents as extra input
  double mse_tot = 0.0;     // trained latent model, inferred latents
  // (baseline - tot) / (baseline - oracle); the fraction of the oracle gap
  // the latent model closes.
  double gap_fraction = 0.0;
};

BaselineReport baseline_suite(const Dataset& ds, const TotModel& trained,
                              const DirectForecastConfig& cfg);

}  // namespace tot
