#pragma once

#include <cstdint>
#include <vector>

#include "tot/tape.hpp"
#include "tot/tensor.hpp"

namespace tot {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment accumulators aligned to ParamStore insertion order.
struct AdamState {
  std::vector<Tensor> m, v;
  std::int64_t step = 0;

  static AdamState init_like(const ParamStore& params);
};

// Standard bias-corrected adaptive-moment update; deterministic.
void adam_step(ParamStore& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamHyper& hyper);

// Global max-norm clip (L2 over all coordinates). Never increases the norm;
// max_norm <= 0 disables. Returns the pre-clip norm.
double clip_grad_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace tot
