#include "tot/model.hpp"

#include <cmath>
#include <string>

#include "tot/common.hpp"

namespace tot {
namespace {

std::string rz_prefix(int i) { return "rz" + std::to_string(i) + "."; }
std::string ro_prefix(int i) { return "ro" + std::to_string(i) + "."; }

Tensor flatten_rows(const Tensor& t) {
  Tensor out = t;
  out.shape = {t.size()};
  return out;
}

Tensor row(const Tensor& t, std::size_t r) {
  Tensor out = Tensor::zeros({t.cols()});
  for (std::size_t j = 0; j < t.cols(); ++j) out.v[j] = t.at(r, j);
  return out;
}

Tensor basis(std::size_t dim, std::size_t i) {
  Tensor e = Tensor::zeros({dim});
  e.v[i] = 1.0;
  return e;
}

}  // namespace

void ModelConfig::validate() const {
  if (n < 1) throw ConfigError("model.n must be >= 1");
  if (t_in < 1) throw ConfigError("model.t_in must be >= 1");
  if (horizon < 1) throw ConfigError("model.horizon must be >= 1");
  if (enc_width < 1 || dec_width < 1 || fore_width < 1 || eta_width < 1 ||
      r_width < 1)
    throw ConfigError("model widths must be >= 1");
  if (!(slope > 0.0) || slope > 1.0)
    throw ConfigError("model.slope must be in (0, 1]");
}

TotModel build_model(const ModelConfig& cfg) {
  cfg.validate();
  TotModel m;
  m.cfg = cfg;
  const int T = cfg.window();
  m.enc = make_mlp(cfg.t_in * cfg.n, {cfg.enc_width, cfg.enc_width},
                   2 * T * cfg.n, cfg.slope, sub_seed(cfg.seed, "enc"));
  m.dec = make_mlp(cfg.n, {cfg.dec_width, cfg.dec_width}, cfg.n, cfg.slope,
                   sub_seed(cfg.seed, "dec"));
  m.eta = make_mlp(cfg.t_in * cfg.n, {cfg.eta_width}, cfg.n, cfg.slope,
                   sub_seed(cfg.seed, "eta"));
  m.fore = make_mlp(2 * cfg.n, {cfg.fore_width, cfg.fore_width}, cfg.n,
                    cfg.slope, sub_seed(cfg.seed, "fore"));
  for (int i = 0; i < cfg.n; ++i) {
    m.rz.push_back(make_mlp(1 + cfg.n, {cfg.r_width}, 1, cfg.slope,
                            sub_seed(cfg.seed, "rz", i, 0, 0)));
    m.ro.push_back(make_mlp(2 * cfg.n + 1, {cfg.r_width}, 1, cfg.slope,
                            sub_seed(cfg.seed, "ro", i, 0, 0)));
  }
  init_mlp_params(m.enc, "enc.", m.params);
  init_mlp_params(m.dec, "dec.", m.params);
  init_mlp_params(m.eta, "eta.", m.params);
  init_mlp_params(m.fore, "fore.", m.params);
  for (int i = 0; i < cfg.n; ++i) init_mlp_params(m.rz[i], rz_prefix(i), m.params);
  for (int i = 0; i < cfg.n; ++i) init_mlp_params(m.ro[i], ro_prefix(i), m.params);
  return m;
}

EncoderOutput encode(const TotModel& m, const Tensor& x_hist, const Tensor& noise) {
  const std::size_t T = static_cast<std::size_t>(m.cfg.window());
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (x_hist.size() != static_cast<std::size_t>(m.cfg.t_in) * n)
    throw DimensionError("encode: history must be t_in x n");
  if (noise.size() != T * n)
    throw DimensionError("encode: noise must cover every window step");

  Tensor raw = mlp_forward(m.enc, m.params, "enc.", flatten_rows(x_hist));
  EncoderOutput out;
  out.mean = Tensor::zeros({T, n});
  out.log_var = Tensor::zeros({T, n});
  out.sample = Tensor::zeros({T, n});
  for (std::size_t k = 0; k < T * n; ++k) {
    out.mean.v[k] = raw.v[k];
    out.log_var.v[k] = raw.v[T * n + k];
    out.sample.v[k] = out.mean.v[k] + std::exp(0.5 * out.log_var.v[k]) * noise.v[k];
  }
  out.sample.validate();
  return out;
}

EncoderOutput encode(const TotModel& m, const Tensor& x_hist, Rng& rng) {
  const std::size_t T = static_cast<std::size_t>(m.cfg.window());
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  Tensor noise = Tensor::zeros({T, n});
  for (double& v : noise.v) v = rng.normal();
  return encode(m, x_hist, noise);
}

Tensor decode(const TotModel& m, const Tensor& z) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z.cols() != n) throw DimensionError("decode: z rows must have width n");
  Tensor out = Tensor::zeros(z.shape);
  for (std::size_t t = 0; t < z.rows(); ++t) {
    Tensor xhat = mlp_forward(m.dec, m.params, "dec.", row(z, t));
    for (std::size_t j = 0; j < n; ++j) out.at(t, j) = xhat.v[j];
  }
  return out;
}

FlowEval latent_noise(const TotModel& m, const Tensor& z_prev, const Tensor& z_curr) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z_prev.size() != n || z_curr.size() != n)
    throw DimensionError("latent_noise: inputs must have width n");
  FlowEval fe;
  fe.residual = Tensor::zeros({n});
  fe.diag = Tensor::zeros({n});
  Tensor input = Tensor::zeros({1 + n});
  for (std::size_t i = 0; i < n; ++i) {
    input.v[0] = z_curr.v[i];
    for (std::size_t j = 0; j < n; ++j) input.v[1 + j] = z_prev.v[j];
    MlpEagerOut fwd = mlp_forward_eager(m.rz[i], m.params, rz_prefix(static_cast<int>(i)), input);
    Tensor tangent = mlp_tangent_eager(m.rz[i], m.params, rz_prefix(static_cast<int>(i)),
                                       fwd, basis(1 + n, 0));
    fe.residual.v[i] = fwd.out.v[0];
    fe.diag.v[i] = tangent.v[0];
    if (std::abs(fe.diag.v[i]) < kDiagGuard) ++fe.guard_warnings;
  }
  return fe;
}

FlowEval obs_noise(const TotModel& m, const Tensor& z_curr, const Tensor& x_prev,
                   const Tensor& x_curr) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z_curr.size() != n || x_prev.size() != n || x_curr.size() != n)
    throw DimensionError("obs_noise: inputs must have width n");
  FlowEval fe;
  fe.residual = Tensor::zeros({n});
  fe.diag = Tensor::zeros({n});
  Tensor input = Tensor::zeros({2 * n + 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) input.v[j] = z_curr.v[j];
    for (std::size_t j = 0; j < n; ++j) input.v[n + j] = x_prev.v[j];
    input.v[2 * n] = x_curr.v[i];
    MlpEagerOut fwd = mlp_forward_eager(m.ro[i], m.params, ro_prefix(static_cast<int>(i)), input);
    Tensor tangent = mlp_tangent_eager(m.ro[i], m.params, ro_prefix(static_cast<int>(i)),
                                       fwd, basis(2 * n + 1, 2 * n));
    fe.residual.v[i] = fwd.out.v[0];
    fe.diag.v[i] = tangent.v[0];
    if (std::abs(fe.diag.v[i]) < kDiagGuard) ++fe.guard_warnings;
  }
  return fe;
}

Tensor forecast(const TotModel& m, const Tensor& z_future, const Tensor& x_hist) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z_future.cols() != n) throw DimensionError("forecast: z rows must have width n");
  if (x_hist.size() != static_cast<std::size_t>(m.cfg.t_in) * n)
    throw DimensionError("forecast: history must be t_in x n");
  Tensor ctx = mlp_forward(m.eta, m.params, "eta.", flatten_rows(x_hist));
  Tensor out = Tensor::zeros(z_future.shape);
  Tensor input = Tensor::zeros({2 * n});
  for (std::size_t h = 0; h < z_future.rows(); ++h) {
    for (std::size_t j = 0; j < n; ++j) input.v[j] = z_future.at(h, j);
    for (std::size_t j = 0; j < n; ++j) input.v[n + j] = ctx.v[j];
    Tensor pred = mlp_forward(m.fore, m.params, "fore.", input);
    for (std::size_t j = 0; j < n; ++j) out.at(h, j) = pred.v[j];
  }
  return out;
}

Tensor decoder_jacobian(const TotModel& m, const Tensor& z) {
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (z.size() != n) throw DimensionError("decoder_jacobian: z must have width n");
  MlpEagerOut fwd = mlp_forward_eager(m.dec, m.params, "dec.", z);
  Tensor jac = Tensor::zeros({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor col = mlp_tangent_eager(m.dec, m.params, "dec.", fwd, basis(n, j));
    for (std::size_t i = 0; i < n; ++i) jac.at(i, j) = col.v[i];
  }
  return jac;
}

ModelVars register_model(GradTape& tape, const TotModel& m) {
  ModelVars vars;
  vars.leaves.reserve(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& [name, tensor] = m.params.item(i);
    vars.leaves.push_back(tape.leaf(tensor, name));
  }
  auto collect = [&](const MlpSpec& spec, const std::string& prefix) {
    MlpVars mv;
    for (int l = 0; l < spec.layers(); ++l) {
      mv.w.push_back(vars.leaves[m.params.index_of(prefix + "W" + std::to_string(l))]);
      mv.b.push_back(vars.leaves[m.params.index_of(prefix + "b" + std::to_string(l))]);
    }
    return mv;
  };
  vars.enc = collect(m.enc, "enc.");
  vars.dec = collect(m.dec, "dec.");
  vars.eta = collect(m.eta, "eta.");
  vars.fore = collect(m.fore, "fore.");
  for (int i = 0; i < m.cfg.n; ++i) vars.rz.push_back(collect(m.rz[i], rz_prefix(i)));
  for (int i = 0; i < m.cfg.n; ++i) vars.ro.push_back(collect(m.ro[i], ro_prefix(i)));
  return vars;
}

}  // namespace tot
