#include "tot/objective.hpp"

#include <cmath>
#include <string>

#include "tot/common.hpp"

namespace tot {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Tensor flat_copy(const Tensor& t) {
  Tensor out = t;
  out.shape = {t.size()};
  return out;
}

Tensor row_of(const Tensor& t, std::size_t r) {
  Tensor out = Tensor::zeros({t.cols()});
  for (std::size_t j = 0; j < t.cols(); ++j) out.v[j] = t.at(r, j);
  return out;
}

Tensor first_rows_flat(const Tensor& t, std::size_t rows) {
  Tensor out = Tensor::zeros({rows * t.cols()});
  for (std::size_t k = 0; k < out.size(); ++k) out.v[k] = t.v[k];
  return out;
}

double mse(const Tensor& pred, const Tensor& truth, const char* what) {
  if (!pred.same_shape(truth))
    throw DimensionError(std::string(what) + ": prediction shape " +
                         pred.shape_str() + " vs truth " + truth.shape_str());
  if (pred.size() == 0) throw DimensionError(std::string(what) + ": empty input");
  double acc = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double d = pred.at(r, c) - truth.at(r, c);
      s += d * d;
    }
    acc += s;
  }
  return acc * (1.0 / static_cast<double>(pred.size()));
}

void check_finite_term(double v, const char* term) {
  if (!std::isfinite(v))
    throw NumericError(std::string("loss term ") + term + " is not finite");
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
    throw ConfigError("loss weights must be >= 0");
}

LossBreakdown total_loss(double l_y, double l_r, double l_kl_z, double l_kl_o,
                         double l_s, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.l_y = l_y;
  b.l_r = l_r;
  b.l_kl_z = l_kl_z;
  b.l_kl_o = l_kl_o;
  b.l_s = l_s;
  double t = l_y + w.alpha * l_r;
  if (w.sign_mode == LossWeights::SignMode::penalize_both) {
    t = t + w.beta * l_kl_z;
    t = t + w.beta * l_kl_o;
  } else {
    t = t + -w.beta * (l_kl_z - l_kl_o);
  }
  t = t + w.gamma * l_s;
  b.total = t;
  check_finite_term(b.total, "total");
  return b;
}

double loss_forecast(const Tensor& pred, const Tensor& truth) {
  const double v = mse(pred, truth, "loss_forecast");
  check_finite_term(v, "l_y");
  return v;
}

double loss_reconstruction(const Tensor& pred, const Tensor& truth) {
  const double v = mse(pred, truth, "loss_reconstruction");
  check_finite_term(v, "l_r");
  return v;
}

PriorLogprob latent_prior_logprob(const TotModel& m, const Tensor& z_window) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z_window.cols() != n || z_window.rows() < 2)
    throw DimensionError("latent_prior_logprob: need at least two rows of width n");
  PriorLogprob out;
  double s1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z_window.at(0, i);
    s1 += zi * zi;
  }
  double lp = -0.5 * s1 + -0.5 * static_cast<double>(n) * kLog2Pi;
  for (std::size_t t = 1; t < z_window.rows(); ++t) {
    FlowEval fe = latent_noise(m, row_of(z_window, t - 1), row_of(z_window, t));
    out.guard_warnings += fe.guard_warnings;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = fe.residual.v[i];
      const double term = (-0.5 * (r * r) + -0.5 * kLog2Pi) +
                          std::log(std::max(std::abs(fe.diag.v[i]), kDiagGuard));
      lp = lp + term;
    }
  }
  check_finite_term(lp, "latent_prior_logprob");
  out.value = lp;
  return out;
}

double kl_latent(const TotModel& m, const EncoderOutput& enc) {
  const std::size_t count = enc.mean.size();
  if (count == 0 || !enc.mean.same_shape(enc.log_var) ||
      !enc.mean.same_shape(enc.sample))
    throw DimensionError("kl_latent: encoder output shapes disagree");
  double a = 0.0;
  for (std::size_t k = 0; k < count; ++k)
    a += -0.5 * enc.log_var.v[k] + -0.5 * kLog2Pi;
  double b = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double d = enc.sample.v[k] - enc.mean.v[k];
    b += (d * d) * std::exp(-enc.log_var.v[k]);
  }
  const double lq = a + -0.5 * b;
  const double lp = latent_prior_logprob(m, enc.sample).value;
  const double v = lq - lp;
  check_finite_term(v, "l_kl_z");
  return v;
}

double kl_obs(const TotModel& m, const Tensor& x_window, const Tensor& z_window) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (!x_window.same_shape(z_window) || x_window.cols() != n || x_window.rows() < 2)
    throw DimensionError("kl_obs: window shapes disagree");
  const std::size_t T = x_window.rows();
  double acc = 0.0;
  for (std::size_t t = 1; t < T; ++t) {
    FlowEval fe = obs_noise(m, row_of(z_window, t), row_of(x_window, t - 1),
                            row_of(x_window, t));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = fe.residual.v[i];
      acc = acc + ((-0.5 * (r * r) + -0.5 * kLog2Pi) +
                   std::log(std::max(std::abs(fe.diag.v[i]), kDiagGuard)));
    }
  }
  const double v = acc * (-1.0 / static_cast<double>((T - 1) * n));
  check_finite_term(v, "l_kl_o");
  return v;
}

double loss_sparsity(const TotModel& m, const Tensor& z_window,
                     const std::vector<int>& steps) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z_window.cols() != n) throw DimensionError("loss_sparsity: z rows must have width n");
  if (steps.empty()) return 0.0;
  double total = 0.0;
  for (int s : steps) {
    if (s < 0 || static_cast<std::size_t>(s) >= z_window.rows())
      throw ConfigError("loss_sparsity: sampled step out of range");
    Tensor jac = decoder_jacobian(m, row_of(z_window, static_cast<std::size_t>(s)));
    double js = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) col += std::abs(jac.at(i, j));
      js = js + col;
    }
    total = total + js;
  }
  const double v = total * (1.0 / static_cast<double>(steps.size()));
  check_finite_term(v, "l_s");
  return v;
}

namespace {

// Shared shape checks plus the per-term finiteness diagnostics.
void check_node_finite(const GradTape& tape, Var v, const char* term) {
  check_finite_term(tape.scalar_value(v), term);
}

}  // namespace

WindowGraph build_window_graph(GradTape& tape, const TotModel& m,
                               const ModelVars& vars, const Tensor& x_window,
                               const Tensor& enc_noise,
                               const std::vector<int>& sparsity_steps,
                               const LossWeights& w, double ls_denom) {
  w.validate();
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  const std::size_t T = static_cast<std::size_t>(m.cfg.window());
  const std::size_t t_in = static_cast<std::size_t>(m.cfg.t_in);
  const std::size_t H = static_cast<std::size_t>(m.cfg.horizon);
  if (x_window.rows() != T || x_window.cols() != n)
    throw DimensionError("window must be (t_in + horizon) x n, got " +
                         x_window.shape_str());
  if (enc_noise.size() != T * n)
    throw DimensionError("encoder noise must cover every window step");

  WindowGraph g;
  Var x_flat = tape.constant(first_rows_flat(x_window, t_in));
  MlpTapeOut enc = mlp_forward_t(tape, m.enc, vars.enc, x_flat);
  Var mean = tape.slice(enc.out, 0, T * n);
  Var log_var = tape.slice(enc.out, T * n, T * n);
  Var sample = tape.add(
      mean, tape.mul(tape.exp(tape.scale_shift(log_var, 0.5, 0.0)),
                     tape.constant(flat_copy(enc_noise))));

  // Reconstruction over the observed prefix.
  Var l_r{};
  for (std::size_t t = 0; t < t_in; ++t) {
    Var zt = tape.slice(sample, t * n, n);
    MlpTapeOut dec = mlp_forward_t(tape, m.dec, vars.dec, zt);
    Var diff = tape.sub(dec.out, tape.constant(row_of(x_window, t)));
    Var s = tape.sum(tape.mul(diff, diff));
    l_r = (t == 0) ? s : tape.add(l_r, s);
  }
  g.l_r = tape.scale_shift(l_r, 1.0 / static_cast<double>(t_in * n), 0.0);
  check_node_finite(tape, g.l_r, "l_r");

  // Forecast over the horizon, conditioned on the history context.
  MlpTapeOut ctx = mlp_forward_t(tape, m.eta, vars.eta, x_flat);
  Var l_y{};
  for (std::size_t h = 0; h < H; ++h) {
    Var zh = tape.slice(sample, (t_in + h) * n, n);
    Var inp = tape.concat({zh, ctx.out});
    MlpTapeOut pred = mlp_forward_t(tape, m.fore, vars.fore, inp);
    Var diff = tape.sub(pred.out, tape.constant(row_of(x_window, t_in + h)));
    Var s = tape.sum(tape.mul(diff, diff));
    l_y = (h == 0) ? s : tape.add(l_y, s);
  }
  g.l_y = tape.scale_shift(l_y, 1.0 / static_cast<double>(H * n), 0.0);
  check_node_finite(tape, g.l_y, "l_y");

  // Posterior entropy term: log q(sample | window).
  Var lq_a = tape.sum(tape.scale_shift(log_var, -0.5, -0.5 * kLog2Pi));
  Var d = tape.sub(sample, mean);
  Var lq_b = tape.scale_shift(
      tape.sum(tape.mul(tape.mul(d, d), tape.exp(tape.scale_shift(log_var, -1.0, 0.0)))),
      -0.5, 0.0);
  Var lq = tape.add(lq_a, lq_b);

  // Flow prior log-density of the sampled path.
  Var z1 = tape.slice(sample, 0, n);
  Var lp = tape.scale_shift(tape.sum(tape.mul(z1, z1)), -0.5,
                            -0.5 * static_cast<double>(n) * kLog2Pi);
  for (std::size_t t = 1; t < T; ++t) {
    Var z_prev = tape.slice(sample, (t - 1) * n, n);
    for (std::size_t i = 0; i < n; ++i) {
      Var zi = tape.slice(sample, t * n + i, 1);
      Var inp = tape.concat({zi, z_prev});
      MlpTapeOut fwd = mlp_forward_t(tape, m.rz[i], vars.rz[i], inp);
      Tensor e0 = Tensor::zeros({1 + n});
      e0.v[0] = 1.0;
      Var diag = mlp_tangent_t(tape, m.rz[i], vars.rz[i], fwd, tape.constant(e0));
      Var term = tape.add(tape.scale_shift(tape.mul(fwd.out, fwd.out), -0.5, -0.5 * kLog2Pi),
                          tape.log_abs_guard(diag, kDiagGuard));
      lp = tape.add(lp, term);
    }
  }
  g.l_kl_z = tape.sub(lq, lp);
  check_node_finite(tape, g.l_kl_z, "l_kl_z");

  // Observation consistency: negative mean conditional log-likelihood under
  // the observation flows, steps 2..T.
  Var klo_acc{};
  for (std::size_t t = 1; t < T; ++t) {
    Var zc = tape.slice(sample, t * n, n);
    Var x_prev = tape.constant(row_of(x_window, t - 1));
    for (std::size_t i = 0; i < n; ++i) {
      Tensor xi = Tensor::zeros({1});
      xi.v[0] = x_window.at(t, i);
      Var inp = tape.concat({zc, x_prev, tape.constant(xi)});
      MlpTapeOut fwd = mlp_forward_t(tape, m.ro[i], vars.ro[i], inp);
      Tensor elast = Tensor::zeros({2 * n + 1});
      elast.v[2 * n] = 1.0;
      Var diag = mlp_tangent_t(tape, m.ro[i], vars.ro[i], fwd, tape.constant(elast));
      Var term = tape.add(tape.scale_shift(tape.mul(fwd.out, fwd.out), -0.5, -0.5 * kLog2Pi),
                          tape.log_abs_guard(diag, kDiagGuard));
      klo_acc = (t == 1 && i == 0) ? term : tape.add(klo_acc, term);
    }
  }
  g.l_kl_o = tape.scale_shift(klo_acc, -1.0 / static_cast<double>((T - 1) * n), 0.0);
  check_node_finite(tape, g.l_kl_o, "l_kl_o");

  // Decoder Jacobian L1 at the sampled steps.
  if (sparsity_steps.empty()) {
    g.ls_sum = tape.constant(Tensor::scalar(0.0));
    g.l_s = g.ls_sum;
  } else {
    Var acc{};
    bool first = true;
    for (int s : sparsity_steps) {
      if (s < 0 || static_cast<std::size_t>(s) >= T)
        throw ConfigError("sparsity step out of range");
      Var zs = tape.slice(sample, static_cast<std::size_t>(s) * n, n);
      MlpTapeOut dec = mlp_forward_t(tape, m.dec, vars.dec, zs);
      Var js{};
      for (std::size_t j = 0; j < n; ++j) {
        Tensor ej = Tensor::zeros({n});
        ej.v[j] = 1.0;
        Var col = mlp_tangent_t(tape, m.dec, vars.dec, dec, tape.constant(ej));
        Var cs = tape.sum(tape.abs(col));
        js = (j == 0) ? cs : tape.add(js, cs);
      }
      acc = first ? js : tape.add(acc, js);
      first = false;
    }
    g.ls_sum = acc;
    g.l_s = tape.scale_shift(acc, 1.0 / static_cast<double>(sparsity_steps.size()), 0.0);
  }
  check_node_finite(tape, g.l_s, "l_s");

  Var total = tape.add(g.l_y, tape.scale_shift(g.l_r, w.alpha, 0.0));
  if (w.sign_mode == LossWeights::SignMode::penalize_both) {
    total = tape.add(total, tape.scale_shift(g.l_kl_z, w.beta, 0.0));
    total = tape.add(total, tape.scale_shift(g.l_kl_o, w.beta, 0.0));
  } else {
    total = tape.add(total, tape.scale_shift(tape.sub(g.l_kl_z, g.l_kl_o), -w.beta, 0.0));
  }
  if (ls_denom > 0.0)
    total = tape.add(total, tape.scale_shift(g.ls_sum, w.gamma / ls_denom, 0.0));
  else
    total = tape.add(total, tape.scale_shift(g.l_s, w.gamma, 0.0));
  g.total = total;
  check_node_finite(tape, g.total, "total");

  g.values.l_y = tape.scalar_value(g.l_y);
  g.values.l_r = tape.scalar_value(g.l_r);
  g.values.l_kl_z = tape.scalar_value(g.l_kl_z);
  g.values.l_kl_o = tape.scalar_value(g.l_kl_o);
  g.values.l_s = tape.scalar_value(g.l_s);
  g.values.total = tape.scalar_value(g.total);
  return g;
}

}  // namespace tot
