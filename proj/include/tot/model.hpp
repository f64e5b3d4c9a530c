#pragma once

#include <cstdint>
#include <vector>

#include "tot/mlp.hpp"
#include "tot/rng.hpp"
#include "tot/tape.hpp"
#include "tot/tensor.hpp"

namespace tot {

struct ModelConfig {
  int n = 5;
  int t_in = 8;
  int horizon = 4;
  int enc_width = 64;
  int dec_width = 64;
  int fore_width = 64;
  int eta_width = 64;
  int r_width = 32;
  double slope = 0.2;
  std::uint64_t seed = 1;

  int window() const { return t_in + horizon; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Networks: encoder x_{1:t_in} -> (mean, log-variance) for all window steps,
// decoder z_t -> x_t applied per step, per-dimension latent flows
// r^z_i(z_{t,i}, z_{t-1}) and observation flows r^o_i(z_t, x_{t-1}, x_{t,i}),
// context net eta(x_{1:t_in}) and forecaster (z_t, eta) -> x_t.
struct TotModel {
  ModelConfig cfg;
  MlpSpec enc, dec, eta, fore;
  std::vector<MlpSpec> rz, ro;
  ParamStore params;
};

TotModel build_model(const ModelConfig& cfg);

// Magnitudes of flow diagonal partials below this are treated as the guard
// value inside logs; hits are surfaced as singular-Jacobian warnings.
constexpr double kDiagGuard = 1e-12;

struct EncoderOutput {
  Tensor mean;     // [T, n]
  Tensor log_var;  // [T, n]
  Tensor sample;   // [T, n], mean + exp(log_var/2) * noise
};

// noise must be [T, n]; zero noise yields the mean path.
EncoderOutput encode(const TotModel& m, const Tensor& x_hist, const Tensor& noise);
EncoderOutput encode(const TotModel& m, const Tensor& x_hist, Rng& rng);

// Per-step decode of each row of z [steps, n] -> [steps, n].
Tensor decode(const TotModel& m, const Tensor& z);

struct FlowEval {
  Tensor residual;  // [n]
  Tensor diag;      // [n], raw partials before guarding
  int guard_warnings = 0;
};

// residual[i] = r^z_i(z_curr[i], z_prev), diag[i] = d residual[i] / d z_curr[i]
// computed by differentiating the net (not finite differences).
FlowEval latent_noise(const TotModel& m, const Tensor& z_prev, const Tensor& z_curr);
// residual[i] = r^o_i(z_curr, x_prev, x_curr[i]), diag w.r.t. x_curr[i].
FlowEval obs_noise(const TotModel& m, const Tensor& z_curr, const Tensor& x_prev,
                   const Tensor& x_curr);

// One forecast per row of z_future, conditioned on the history context.
Tensor forecast(const TotModel& m, const Tensor& z_future, const Tensor& x_hist);

// J[i][j] = d decoded_i / d z_j at the given point.
Tensor decoder_jacobian(const TotModel& m, const Tensor& z);

// Tape-side registration: leaves appear in ParamStore order so backward
// gradients align with the store.
struct ModelVars {
  std::vector<Var> leaves;
  MlpVars enc, dec, eta, fore;
  std::vector<MlpVars> rz, ro;
};

ModelVars register_model(GradTape& tape, const TotModel& m);

}  // namespace tot
