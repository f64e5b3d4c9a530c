#include "tot/flow_density.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tot/common.hpp"
#include "tot/optim.hpp"

namespace tot {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

double flow_conditional_density(const TotModel& m, double z_prev, double z_curr) {
  if (m.cfg.n != 1)
    throw ConfigError("flow density utilities require a scalar latent (n == 1)");
  Tensor prev = Tensor::zeros({1}), curr = Tensor::zeros({1});
  prev.v[0] = z_prev;
  curr.v[0] = z_curr;
  FlowEval fe = latent_noise(m, prev, curr);
  const double r = fe.residual.v[0];
  const double det = std::max(std::abs(fe.diag.v[0]), kDiagGuard);
  return std::exp(-0.5 * r * r - 0.5 * kLog2Pi) * det;
}

double trapezoid_flow_mass(const TotModel& m, double z_prev, double lo,
                           double hi, int points) {
  if (points < 2) throw ConfigError("trapezoid rule needs at least 2 points");
  if (!(hi > lo)) throw ConfigError("integration interval is empty");
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double z = lo + h * static_cast<double>(i);
    const double f = flow_conditional_density(m, z_prev, z);
    acc += (i == 0 || i == points - 1) ? 0.5 * f : f;
  }
  return acc * h;
}

void Flow1dTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("flow training epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("flow training batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("flow training learning_rate must be > 0");
}

void train_flow_1d(TotModel& m, const std::vector<double>& z_series,
                   const Flow1dTrainConfig& cfg) {
  cfg.validate();
  if (m.cfg.n != 1)
    throw ConfigError("flow density utilities require a scalar latent (n == 1)");
  if (z_series.size() < 2)
    throw ConfigError("flow training needs at least one consecutive pair");

  const std::size_t n_pairs = z_series.size() - 1;
  AdamState adam = AdamState::init_like(m.params);
  const AdamHyper hyper{cfg.learning_rate, 0.9, 0.999, 1e-8};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(sub_seed(cfg.seed, "flow-shuffle", static_cast<std::uint64_t>(epoch), 0, 0));
    std::vector<std::size_t> order(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    for (std::size_t off = 0; off < order.size();
         off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t B =
          std::min(order.size() - off, static_cast<std::size_t>(cfg.batch_size));
      GradTape tape;
      ModelVars vars = register_model(tape, m);
      Var acc{};
      for (std::size_t r = 0; r < B; ++r) {
        const std::size_t t = order[off + r];
        Tensor in = Tensor::zeros({2});
        in.v[0] = z_series[t + 1];
        in.v[1] = z_series[t];
        MlpTapeOut fwd = mlp_forward_t(tape, m.rz[0], vars.rz[0], tape.constant(in));
        Tensor e0 = Tensor::zeros({2});
        e0.v[0] = 1.0;
        Var diag = mlp_tangent_t(tape, m.rz[0], vars.rz[0], fwd, tape.constant(e0));
        // Negative conditional log-likelihood of the pair.
        Var nll = tape.sub(tape.scale_shift(tape.mul(fwd.out, fwd.out), 0.5, 0.5 * kLog2Pi),
                           tape.log_abs_guard(diag, kDiagGuard));
        acc = (r == 0) ? nll : tape.add(acc, nll);
      }
      Var loss = tape.scale_shift(acc, 1.0 / static_cast<double>(B), 0.0);
      std::vector<Tensor> grads;
      tape.backward_into(loss, Tensor::scalar(1.0), vars.leaves, grads);
      clip_grad_norm(grads, cfg.grad_clip);
      adam_step(m.params, grads, adam, hyper);
    }
  }
}

}  // namespace tot
