#pragma once

#include <vector>

#include "tot/model.hpp"
#include "tot/tensor.hpp"

namespace tot {

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.01;
  double gamma = 0.01;
  // penalize_both adds both divergence terms; verbatim applies
  // -beta * (latent - observation) as stated in the source objective.
  enum class SignMode { penalize_both, verbatim };
  SignMode sign_mode = SignMode::penalize_both;

  void validate() const;
};

struct LossBreakdown {
  double l_y = 0.0;
  double l_r = 0.0;
  double l_kl_z = 0.0;
  double l_kl_o = 0.0;
  double l_s = 0.0;
  double total = 0.0;
};

LossBreakdown total_loss(double l_y, double l_r, double l_kl_z, double l_kl_o,
                         double l_s, const LossWeights& w);

// Mean squared error over all entries.
double loss_forecast(const Tensor& pred, const Tensor& truth);
double loss_reconstruction(const Tensor& pred, const Tensor& truth);

struct PriorLogprob {
  double value = 0.0;
  int guard_warnings = 0;
};

// log p(z_1:T) under the autoregressive flow prior: standard normal on the
// first step, then per-dimension change of variables through r^z.
PriorLogprob latent_prior_logprob(const TotModel& m, const Tensor& z_window);

// Single-sample KL estimate summed over the window: log q(sample) - log p.
double kl_latent(const TotModel& m, const EncoderOutput& enc);

// Negative mean conditional log-likelihood of the observations under the
// per-dimension observation flows, steps 2..T.
double kl_obs(const TotModel& m, const Tensor& x_window, const Tensor& z_window);

// Mean over sampled steps of the entrywise L1 norm of the decoder Jacobian.
double loss_sparsity(const TotModel& m, const Tensor& z_window,
                     const std::vector<int>& steps);

// Differentiable window objective. Terms are individual scalar nodes so
// callers can backpropagate any one of them. l_s is the mean over this
// window's sampled steps; ls_sum is the undivided sum. When ls_denom > 0 the
// total uses gamma * ls_sum / ls_denom instead of gamma * l_s, which lets a
// batch spread one global sparsity sample budget across windows.
struct WindowGraph {
  Var l_y, l_r, l_kl_z, l_kl_o, l_s, ls_sum;
  Var total;
  // Node values; l_s is the per-window mean, total reflects the node as built
  // (so it carries the ls_denom scaling when one was given).
  LossBreakdown values;
};

WindowGraph build_window_graph(GradTape& tape, const TotModel& m,
                               const ModelVars& vars, const Tensor& x_window,
                               const Tensor& enc_noise,
                               const std::vector<int>& sparsity_steps,
                               const LossWeights& w, double ls_denom = 0.0);

}  // namespace tot
