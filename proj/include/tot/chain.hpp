#pragma once

#include <string>
#include <vector>

#include "tot/rng.hpp"
#include "tot/tensor.hpp"

namespace tot {

// Fully-specified finite-state analogue of the generative process:
// z_t | z_{t-1} ~ p_z[z_{t-1}, :], x_t | x_{t-1}, z_t ~ p_x[z_t][x_{t-1}, :].
// States are valued as their index when moments are taken.
struct DiscreteLatentChain {
  int k = 1;  // latent states
  int m = 1;  // observation states
  Tensor p_z;               // [k, k]
  std::vector<Tensor> p_x;  // k matrices [m, m], indexed by current z

  void validate() const;
};

constexpr int kMaxChainStates = 16;

// Row-stochastic matrices with every entry >= min_prob; requires
// min_prob * max(k, m) < 1.
DiscreteLatentChain random_chain(int k, int m, Rng& rng, double min_prob = 0.05);

std::string chain_to_json(const DiscreteLatentChain& c);
DiscreteLatentChain chain_from_json(const std::string& text);
DiscreteLatentChain load_chain_file(const std::string& path);
void save_chain_file(const DiscreteLatentChain& c, const std::string& path);

// Stationary distribution of the joint (z, x) chain, state index z * m + x.
// Throws NumericError when it is not unique.
Tensor stationary_joint(const DiscreteLatentChain& c);

}  // namespace tot
