#pragma once

#include <cstdint>
#include <vector>

#include "tot/objective.hpp"

namespace tot {

struct BatchWindow {
  std::int64_t start = 0;          // absolute row of the window's first step
  Tensor noise;                    // [T, n] encoder noise
  std::vector<int> sparsity_steps; // window-local step indices
};

struct BatchGrad {
  std::vector<Tensor> grads;  // d(mean objective)/d(param), ParamStore order
  // Core terms averaged over windows; l_s is the batch mean over all sampled
  // steps, total is the batch objective the gradient corresponds to.
  LossBreakdown mean;
  int guard_hits = 0;
};

// Objective: (1/B) sum_w [l_y + a*l_r +/- b*(...)] + g * mean over the batch's
// sampled steps of the Jacobian L1. Accumulation order is fixed by window
// index, so results are bitwise identical across thread counts and between
// the two kernels.
BatchGrad batch_gradient_serial(const TotModel& m, const Tensor& x_series,
                                const std::vector<BatchWindow>& windows,
                                const LossWeights& w);
BatchGrad batch_gradient_parallel(const TotModel& m, const Tensor& x_series,
                                  const std::vector<BatchWindow>& windows,
                                  const LossWeights& w);
BatchGrad batch_gradient(const TotModel& m, const Tensor& x_series,
                         const std::vector<BatchWindow>& windows,
                         const LossWeights& w, bool parallel);

}  // namespace tot
