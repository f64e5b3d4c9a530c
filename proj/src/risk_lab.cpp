#include "tot/risk_lab.hpp"

#include <algorithm>
#include <cmath>

#include "tot/common.hpp"

namespace tot {
namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments dist_moments(const std::vector<double>& p) {
  Moments mo;
  double m2 = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double v = static_cast<double>(x);
    mo.mean += v * p[x];
    m2 += v * v * p[x];
  }
  mo.var = m2 - mo.mean * mo.mean;
  return mo;
}

}  // namespace

void ChannelSpec::validate(int k) const {
  if (kind == ChannelKind::noisy && (p_flip < 0.0 || p_flip > 1.0))
    throw ConfigError("channel p_flip must be in [0, 1]");
  if (kind == ChannelKind::bijection && !perm.empty()) {
    if (perm.size() != static_cast<std::size_t>(k))
      throw ConfigError("channel permutation must have k entries");
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int p : perm) {
      if (p < 0 || p >= k || seen[static_cast<std::size_t>(p)])
        throw ConfigError("channel permutation is not a bijection");
      seen[static_cast<std::size_t>(p)] = true;
    }
  }
}

ChannelKind channel_kind_from_string(const std::string& s) {
  if (s == "identity") return ChannelKind::identity;
  if (s == "bijection") return ChannelKind::bijection;
  if (s == "noisy") return ChannelKind::noisy;
  if (s == "independent") return ChannelKind::independent;
  throw ConfigError("unknown channel '" + s +
                    "', expected identity, bijection, noisy or independent");
}

std::string channel_kind_to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::identity: return "identity";
    case ChannelKind::bijection: return "bijection";
    case ChannelKind::noisy: return "noisy";
    default: return "independent";
  }
}

Tensor channel_matrix(const ChannelSpec& channel, int k) {
  channel.validate(k);
  const std::size_t ks = static_cast<std::size_t>(k);
  Tensor q = Tensor::zeros({ks, ks});
  switch (channel.kind) {
    case ChannelKind::identity:
      for (std::size_t z = 0; z < ks; ++z) q.at(z, z) = 1.0;
      break;
    case ChannelKind::bijection: {
      std::vector<int> perm = channel.perm;
      if (perm.empty()) {
        perm.resize(ks);
        for (std::size_t i = 0; i < ks; ++i) perm[i] = static_cast<int>(i);
        Rng rng(sub_seed(channel.seed, "channel-perm"));
        for (std::size_t i = ks; i > 1; --i)
          std::swap(perm[i - 1], perm[rng.below(i)]);
      }
      for (std::size_t z = 0; z < ks; ++z)
        q.at(z, static_cast<std::size_t>(perm[z])) = 1.0;
      break;
    }
    case ChannelKind::noisy:
      for (std::size_t z = 0; z < ks; ++z)
        for (std::size_t h = 0; h < ks; ++h)
          q.at(z, h) = channel.p_flip / static_cast<double>(k) +
                       (z == h ? 1.0 - channel.p_flip : 0.0);
      break;
    case ChannelKind::independent:
      for (std::size_t z = 0; z < ks; ++z)
        for (std::size_t h = 0; h < ks; ++h)
          q.at(z, h) = 1.0 / static_cast<double>(k);
      break;
  }
  return q;
}

RiskReport risk_lab(const DiscreteLatentChain& chain, const ChannelSpec& channel) {
  chain.validate();
  channel.validate(chain.k);
  const int k = chain.k, m = chain.m;
  const Tensor pi = stationary_joint(chain);
  const Tensor q = channel_matrix(channel, k);

  // One-step predictive law per conditioning pair (z, x).
  std::vector<std::vector<double>> pred(static_cast<std::size_t>(k * m),
                                        std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (int z = 0; z < k; ++z)
    for (int x = 0; x < m; ++x)
      for (int zn = 0; zn < k; ++zn)
        for (int xn = 0; xn < m; ++xn)
          pred[static_cast<std::size_t>(z * m + x)][static_cast<std::size_t>(xn)] +=
              chain.p_z.at(static_cast<std::size_t>(z), static_cast<std::size_t>(zn)) *
              chain.p_x[static_cast<std::size_t>(zn)].at(static_cast<std::size_t>(x),
                                                         static_cast<std::size_t>(xn));

  RiskReport rep;
  for (int z = 0; z < k; ++z)
    for (int x = 0; x < m; ++x)
      rep.r_z += pi.v[static_cast<std::size_t>(z * m + x)] *
                 dist_moments(pred[static_cast<std::size_t>(z * m + x)]).var;

  for (int x = 0; x < m; ++x) {
    double px = 0.0;
    for (int z = 0; z < k; ++z) px += pi.v[static_cast<std::size_t>(z * m + x)];
    if (px <= 0.0) continue;

    std::vector<double> w(static_cast<std::size_t>(k));
    for (int z = 0; z < k; ++z)
      w[static_cast<std::size_t>(z)] = pi.v[static_cast<std::size_t>(z * m + x)] / px;

    std::vector<double> mix(static_cast<std::size_t>(m), 0.0);
    for (int z = 0; z < k; ++z)
      for (int xn = 0; xn < m; ++xn)
        mix[static_cast<std::size_t>(xn)] +=
            w[static_cast<std::size_t>(z)] *
            pred[static_cast<std::size_t>(z * m + x)][static_cast<std::size_t>(xn)];
    rep.r_o += px * dist_moments(mix).var;

    double mean_of_means = 0.0, mean_of_sq = 0.0;
    for (int z = 0; z < k; ++z) {
      const double mu = dist_moments(pred[static_cast<std::size_t>(z * m + x)]).mean;
      mean_of_means += w[static_cast<std::size_t>(z)] * mu;
      mean_of_sq += w[static_cast<std::size_t>(z)] * mu * mu;
    }
    rep.cross_term += px * (mean_of_sq - mean_of_means * mean_of_means);

    // Degraded representation: posterior over z given x pushed through the
    // channel, then conditioning on the channel output.
    for (int h = 0; h < k; ++h) {
      double qh = 0.0;
      for (int z = 0; z < k; ++z)
        qh += w[static_cast<std::size_t>(z)] *
              q.at(static_cast<std::size_t>(z), static_cast<std::size_t>(h));
      if (qh <= 0.0) continue;
      std::vector<double> cond(static_cast<std::size_t>(m), 0.0);
      for (int z = 0; z < k; ++z) {
        const double wz = w[static_cast<std::size_t>(z)] *
                          q.at(static_cast<std::size_t>(z), static_cast<std::size_t>(h)) / qh;
        if (wz == 0.0) continue;
        for (int xn = 0; xn < m; ++xn)
          cond[static_cast<std::size_t>(xn)] +=
              wz * pred[static_cast<std::size_t>(z * m + x)][static_cast<std::size_t>(xn)];
      }
      rep.r_zhat += px * qh * dist_moments(cond).var;
    }
  }
  rep.decomposition_residual = std::abs(rep.r_o - (rep.r_z + rep.cross_term));
  return rep;
}

}  // namespace tot
