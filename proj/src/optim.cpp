#include "tot/optim.hpp"

#include <cmath>

#include "tot/common.hpp"

namespace tot {

AdamState AdamState::init_like(const ParamStore& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.push_back(Tensor::zeros(params.item(i).second.shape));
    s.v.push_back(Tensor::zeros(params.item(i).second.shape));
  }
  return s;
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw DimensionError("adam: parameter/gradient/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = params.item(p).second;
    const Tensor& g = grads[p];
    if (!g.same_shape(theta))
      throw DimensionError("adam: gradient shape mismatch for " +
                           params.item(p).first);
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m.v[i] = hyper.beta1 * m.v[i] + (1.0 - hyper.beta1) * g.v[i];
      v.v[i] = hyper.beta2 * v.v[i] + (1.0 - hyper.beta2) * g.v[i] * g.v[i];
      const double mhat = m.v[i] / bc1;
      const double vhat = v.v[i] / bc2;
      theta.v[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
    theta.validate();
  }
}

double clip_grad_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double x : g.v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads)
      for (double& x : g.v) x *= scale;
  }
  return norm;
}

}  // namespace tot
