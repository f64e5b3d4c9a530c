#pragma once

#include <cstdint>
#include <vector>

#include "tot/batch_grad.hpp"
#include "tot/checkpoint.hpp"
#include "tot/synthgen.hpp"

namespace tot {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;            // <= 0 disables
  int online_steps_per_arrival = 1;  // K
  int sparsity_samples_per_batch = 8;
  int windows_per_epoch = 0;  // 0 = every training window once per epoch
  LossWeights weights;
  bool parallel = true;

  void validate() const;
};

struct EpochStats {
  LossBreakdown mean;  // averaged over the epoch's batches
  double grad_norm_mean = 0.0;
  int guard_hits = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// Shuffled sliding windows over the training slice, one optimizer step per
// batch. Every random draw is keyed by (seed, purpose, epoch, window), so a
// run resumed from counters continues the exact stream of the original run.
TrainHistory train_offline(const Dataset& ds, TotModel& model,
                           const TrainConfig& cfg, AdamState& adam,
                           TrainCounters& counters);
TrainHistory train_offline(const Dataset& ds, TotModel& model,
                           const TrainConfig& cfg);

struct OnlineRow {
  std::int64_t arrival = 0;  // index of the newest observed step
  double mse = 0.0, mae = 0.0;
  double cum_mse = 0.0, cum_mae = 0.0;
  LossBreakdown adapt;  // last adaptation step at this arrival (zeros if none)
};

struct OnlineResult {
  std::vector<OnlineRow> rows;
  double mean_mse = 0.0, mean_mae = 0.0;
};

// Causal protocol: at each arrival t, forecast steps t+1..t+horizon from data
// up to t only, then take K adaptation steps on the window ending at t.
// Arrival range defaults to [t_in - 1, total - horizon).
OnlineResult online_run(const Dataset& ds, TotModel& model,
                        const TrainConfig& cfg, AdamState& adam,
                        TrainCounters& counters,
                        std::int64_t begin_arrival = -1,
                        std::int64_t end_arrival = -1);
OnlineResult online_run(const Dataset& ds, TotModel& model,
                        const TrainConfig& cfg);

}  // namespace tot
