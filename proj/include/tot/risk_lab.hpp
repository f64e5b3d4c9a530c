#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tot/chain.hpp"

namespace tot {

// Representation channel z -> zhat used to quantify how latent degradation
// moves the one-step predictive risk between the latent-aware floor and the
// observation-only ceiling.
enum class ChannelKind { identity, bijection, noisy, independent };

struct ChannelSpec {
  ChannelKind kind = ChannelKind::identity;
  double p_flip = 0.2;     // noisy: probability of resampling uniformly
  std::vector<int> perm;   // bijection: explicit permutation, else drawn
  std::uint64_t seed = 0;  // bijection: permutation seed when perm is empty

  void validate(int k) const;
};

ChannelKind channel_kind_from_string(const std::string& s);
std::string channel_kind_to_string(ChannelKind kind);

struct RiskReport {
  double r_z = 0.0;     // E Var(x' | z, x), latent-aware risk
  double r_o = 0.0;     // E Var(x' | x), observation-only risk
  double r_zhat = 0.0;  // risk with z replaced by the channel output
  double cross_term = 0.0;           // E_x Var_{z|x} E[x' | z, x]
  double decomposition_residual = 0.0;  // |r_o - r_z - cross_term|
};

// Exact enumeration under the stationary law; states valued as their index.
RiskReport risk_lab(const DiscreteLatentChain& chain, const ChannelSpec& channel);

// Channel matrix q[z][zhat] used by risk_lab; exposed for tests.
Tensor channel_matrix(const ChannelSpec& channel, int k);

}  // namespace tot
