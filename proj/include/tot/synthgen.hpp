#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tot/rng.hpp"
#include "tot/tensor.hpp"

namespace tot {

struct GenConfig {
  int n = 5;
  int lag = 1;
  bool obs_edges = true;
  std::int64_t total_steps = 20000;
  int validation_size = 1024;
  std::uint64_t seed = 1;
  double noise_std_z = 1.0;
  double noise_std_o = 0.4;
  // Banded sparse mixing support satisfying the empty-intimate-set assumption;
  // carrier for the sparsity-recovery experiment.
  bool sparse_mixing = false;

  void validate() const;
  bool operator==(const GenConfig&) const = default;
};

// Latent transition weights: one n x n matrix per lag (time-delayed parents)
// plus a strictly lower-triangular instantaneous matrix (V[i][j] = 0 for
// j >= i), so the within-step graph is acyclic by construction.
struct LatentProcessParams {
  std::vector<Tensor> W;
  Tensor V;
};

struct MixingParams {
  Tensor W_x;  // [n, n] autoregressive observation weights
  Tensor W_m;  // [n, n] mixing weights
  bool has_mask = false;
  std::vector<std::uint8_t> mask;  // row-major [i*n+j]: z_i feeds x_j
};

struct GeneratorParams {
  LatentProcessParams latent;
  MixingParams mixing;
};

struct Dataset {
  Tensor x;  // [T, n]
  Tensor z;  // [T, n]
  GenConfig config;
  std::int64_t train_begin = 0, train_end = 0;
  std::int64_t val_begin = 0, val_end = 0;
  // Regenerated from config.seed on load; not serialized.
  GeneratorParams gen;
};

// All weights uniform in [-0.5, 0.5] from the config seed (V masked strictly
// lower-triangular, W_m masked to a banded support when sparse_mixing).
GeneratorParams draw_generator_params(const GenConfig& cfg);

// z_{t,i} = (Σ_l leaky((W_l·z_{t-l})_i, 0.2) + Σ_{j<i} V[i,j]·z_{t,j})·ε_i
//           + ε^z_i, components produced in index order; both noises are
// standard normal scaled by noise_std_z. z_hist rows ordered oldest -> newest.
// The rng variant draws n multiplicative noises, then n additive ones.
Tensor gen_latent_step(const LatentProcessParams& params,
                       const std::vector<Tensor>& z_hist, Rng& rng,
                       double noise_std_z);
Tensor gen_latent_step_with_noise(const LatentProcessParams& params,
                                  const std::vector<Tensor>& z_hist,
                                  const Tensor& eps_mult,
                                  const Tensor& eps_add);

// x_t = leaky(leaky(0.2·leaky(x_{t-1}·W_x) + z_t + ε^o)·W_m); the W_x branch
// is zero when obs_edges is false.
Tensor gen_obs_step(const MixingParams& params, const Tensor& x_prev,
                    const Tensor& z_t, Rng& rng, bool obs_edges,
                    double noise_std_o);
Tensor gen_obs_step_with_noise(const MixingParams& params, const Tensor& x_prev,
                               const Tensor& z_t, const Tensor& eps_o,
                               bool obs_edges);

// Simulates total_steps after a 100-step discarded burn-in; reserves the last
// validation_size steps for validation.
Dataset generate_dataset(const GenConfig& cfg);

// Same latent process throughout, mixing weights redrawn from drift_seed at
// the halfway step; exercises online adaptation under distribution shift.
Dataset generate_drift_dataset(const GenConfig& cfg, std::uint64_t drift_seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);
void export_dataset_csv(const Dataset& ds, const std::string& path);

// Named data regimes: A (n=5, lag 1, obs edges), B (n=5, lag 1, none),
// C (n=5, lag 2, obs edges), D (n=10, lag 1, obs edges).
GenConfig preset_gen_config(char preset);

constexpr int kBurnInSteps = 100;

}  // namespace tot
