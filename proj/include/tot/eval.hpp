#pragma once

#include <cstdint>
#include <vector>

#include "tot/model.hpp"
#include "tot/synthgen.hpp"
#include "tot/tensor.hpp"

namespace tot {

struct MccReport {
  Tensor abs_corr;              // [n, n] |Pearson| between true and estimated dims
  std::vector<int> assignment;  // true dim i -> estimated dim assignment[i]
  double score = 0.0;           // mean matched |correlation|
};

// Mean correlation coefficient under the best one-to-one matching; invariant
// to permutation and sign of the estimated dimensions. Constant dimensions
// correlate as zero.
MccReport mcc(const Tensor& z_true, const Tensor& z_est);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

ForecastMetrics forecast_metrics(const Tensor& pred, const Tensor& truth);

// Posterior-mean latent estimate at each step of [begin, end): the encoder
// runs on the window whose last observed step is the queried one, so only
// past data is used. Requires begin >= t_in - 1.
Tensor encode_series(const TotModel& m, const Dataset& ds, std::int64_t begin,
                     std::int64_t end);

// Mean-path forecast error over every validation window (stride 1).
ForecastMetrics validation_forecast_metrics(const TotModel& m, const Dataset& ds);
double validation_forecast_mse(const TotModel& m, const Dataset& ds);

struct SupportRecovery {
  Tensor mean_abs_jac;  // [n, n] averaged |decoder Jacobian|, latent axis
                        // aligned to true dimensions via the MCC matching
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Decoder-Jacobian support versus the generator's mixing mask: entries above
// threshold_frac * max |J| are predicted edges. Latent axes are aligned with
// the true dimensions through the MCC assignment on the validation slice.
SupportRecovery jacobian_support_f1(const TotModel& m, const Dataset& ds,
                                    int sample_steps, double threshold_frac);

}  // namespace tot
