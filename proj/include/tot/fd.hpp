#pragma once

#include <functional>

#include "tot/tape.hpp"

namespace tot {

// Central-difference gradient oracle: perturbs every parameter coordinate by
// +/- epsilon and differences the loss. Independent of the tape machinery by
// construction (only calls the provided loss closure).
ParamStore fd_gradient(const std::function<double(const ParamStore&)>& loss_fn,
                       const ParamStore& params, double epsilon = 1e-5);

// Max over coordinates of |a - b| relative to the larger gradient magnitude:
// ||a - b||_inf / max(||a||_inf, ||b||_inf, floor).
double gradient_rel_error(const ParamStore& a, const ParamStore& b,
                          double floor = 1e-12);

}  // namespace tot
