#include "tot/baselines.hpp"

#include <algorithm>
#include <string>

#include "tot/common.hpp"
#include "tot/optim.hpp"

namespace tot {
namespace {

std::size_t input_dim(ForecastRegime regime, int t_in, int horizon, int n) {
  const std::size_t base = static_cast<std::size_t>(t_in) * n;
  if (regime == ForecastRegime::x_only) return base;
  return base + static_cast<std::size_t>(horizon) * n;
}

// Input layout: flattened observation history, then (for the augmented
// regimes) flattened future latents over the horizon.
Tensor build_input(const Dataset& ds, ForecastRegime regime,
                   const DirectForecastConfig& cfg, std::int64_t start,
                   Rng* noise_rng) {
  const std::size_t n = static_cast<std::size_t>(ds.config.n);
  Tensor in = Tensor::zeros({input_dim(regime, cfg.t_in, cfg.horizon, ds.config.n)});
  std::size_t k = 0;
  for (int t = 0; t < cfg.t_in; ++t)
    for (std::size_t j = 0; j < n; ++j)
      in.v[k++] = ds.x.at(static_cast<std::size_t>(start + t), j);
  if (regime == ForecastRegime::x_true_z) {
    for (int h = 0; h < cfg.horizon; ++h)
      for (std::size_t j = 0; j < n; ++j)
        in.v[k++] = ds.z.at(static_cast<std::size_t>(start + cfg.t_in + h), j);
  } else if (regime == ForecastRegime::x_noise_z) {
    for (int h = 0; h < cfg.horizon; ++h)
      for (std::size_t j = 0; j < n; ++j) in.v[k++] = noise_rng->normal();
  }
  return in;
}

Tensor build_target(const Dataset& ds, const DirectForecastConfig& cfg,
                    std::int64_t start) {
  const std::size_t n = static_cast<std::size_t>(ds.config.n);
  Tensor out = Tensor::zeros({static_cast<std::size_t>(cfg.horizon) * n});
  std::size_t k = 0;
  for (int h = 0; h < cfg.horizon; ++h)
    for (std::size_t j = 0; j < n; ++j)
      out.v[k++] = ds.x.at(static_cast<std::size_t>(start + cfg.t_in + h), j);
  return out;
}

}  // namespace

void DirectForecastConfig::validate() const {
  if (t_in < 1 || horizon < 1) throw ConfigError("baseline t_in and horizon must be >= 1");
  if (width < 1) throw ConfigError("baseline width must be >= 1");
  if (epochs < 1) throw ConfigError("baseline epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("baseline batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("baseline learning_rate must be > 0");
  if (windows_per_epoch < 0) throw ConfigError("baseline windows_per_epoch must be >= 0");
}

DirectForecaster train_direct_forecaster(const Dataset& ds, ForecastRegime regime,
                                         const DirectForecastConfig& cfg) {
  cfg.validate();
  ds.config.validate();
  const int n = ds.config.n;
  const std::int64_t T = cfg.t_in + cfg.horizon;
  const std::int64_t n_windows = ds.train_end - ds.train_begin - T + 1;
  if (n_windows < 1) throw ConfigError("training slice shorter than one window");

  DirectForecaster f;
  f.regime = regime;
  f.cfg = cfg;
  f.spec = make_mlp(static_cast<int>(input_dim(regime, cfg.t_in, cfg.horizon, n)),
                    {cfg.width, cfg.width}, cfg.horizon * n, 0.2,
                    sub_seed(cfg.seed, "direct-init"));
  init_mlp_params(f.spec, "f.", f.params);

  AdamState adam = AdamState::init_like(f.params);
  const AdamHyper hyper{cfg.learning_rate, 0.9, 0.999, 1e-8};
  const double out_dim = static_cast<double>(cfg.horizon) * n;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(sub_seed(cfg.seed, "direct-shuffle", static_cast<std::uint64_t>(epoch), 0, 0));
    std::vector<std::int64_t> starts(static_cast<std::size_t>(n_windows));
    for (std::int64_t i = 0; i < n_windows; ++i)
      starts[static_cast<std::size_t>(i)] = ds.train_begin + i;
    for (std::size_t i = starts.size(); i > 1; --i)
      std::swap(starts[i - 1], starts[shuffle_rng.below(i)]);
    if (cfg.windows_per_epoch > 0 &&
        static_cast<std::int64_t>(starts.size()) > cfg.windows_per_epoch)
      starts.resize(static_cast<std::size_t>(cfg.windows_per_epoch));

    for (std::size_t off = 0; off < starts.size();
         off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t B =
          std::min(starts.size() - off, static_cast<std::size_t>(cfg.batch_size));
      GradTape tape;
      std::vector<Var> leaves;
      for (std::size_t p = 0; p < f.params.size(); ++p)
        leaves.push_back(tape.leaf(f.params.item(p).second, f.params.item(p).first));
      MlpVars mv;
      for (int l = 0; l < f.spec.layers(); ++l) {
        mv.w.push_back(leaves[f.params.index_of("f.W" + std::to_string(l))]);
        mv.b.push_back(leaves[f.params.index_of("f.b" + std::to_string(l))]);
      }
      Var acc{};
      for (std::size_t r = 0; r < B; ++r) {
        const std::int64_t start = starts[off + r];
        Rng noise_rng(sub_seed(cfg.seed, "direct-noise", static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(start), 0));
        Tensor in = build_input(ds, regime, cfg, start, &noise_rng);
        MlpTapeOut fwd = mlp_forward_t(tape, f.spec, mv, tape.constant(in));
        Var diff = tape.sub(fwd.out, tape.constant(build_target(ds, cfg, start)));
        Var s = tape.sum(tape.mul(diff, diff));
        acc = (r == 0) ? s : tape.add(acc, s);
      }
      Var loss = tape.scale_shift(acc, 1.0 / (static_cast<double>(B) * out_dim), 0.0);
      std::vector<Tensor> grads;
      tape.backward_into(loss, Tensor::scalar(1.0), leaves, grads);
      clip_grad_norm(grads, cfg.grad_clip);
      adam_step(f.params, grads, adam, hyper);
    }
  }
  return f;
}

double direct_forecaster_mse(const DirectForecaster& f, const Dataset& ds) {
  const DirectForecastConfig& cfg = f.cfg;
  const std::int64_t T = cfg.t_in + cfg.horizon;
  const std::int64_t last_start = ds.val_end - T;
  if (last_start < ds.val_begin)
    throw ConfigError("validation slice shorter than one window");
  const std::size_t n = static_cast<std::size_t>(ds.config.n);

  double acc = 0.0;
  std::int64_t count = 0;
  for (std::int64_t start = ds.val_begin; start <= last_start; ++start) {
    Rng noise_rng(sub_seed(cfg.seed, "direct-val-noise",
                           static_cast<std::uint64_t>(start), 0, 0));
    Tensor in = build_input(ds, f.regime, cfg, start, &noise_rng);
    Tensor pred = mlp_forward(f.spec, f.params, "f.", in);
    Tensor target = build_target(ds, cfg, start);
    double se = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred.v[k] - target.v[k];
      se += d * d;
    }
    acc += se / static_cast<double>(static_cast<std::size_t>(cfg.horizon) * n);
    ++count;
  }
  return acc / static_cast<double>(count);
}

BaselineReport baseline_suite(const Dataset& ds, const TotModel& trained,
                              const DirectForecastConfig& cfg_in) {
  DirectForecastConfig cfg = cfg_in;
  cfg.t_in = trained.cfg.t_in;
  cfg.horizon = trained.cfg.horizon;
  cfg.validate();

  BaselineReport rep;
  rep.mse_x_only =
      direct_forecaster_mse(train_direct_forecaster(ds, ForecastRegime::x_only, cfg), ds);
  rep.mse_oracle =
      direct_forecaster_mse(train_direct_forecaster(ds, ForecastRegime::x_true_z, cfg), ds);
  rep.mse_tot = validation_forecast_mse(trained, ds);
  const double denom = rep.mse_x_only - rep.mse_oracle;
  rep.gap_fraction = denom > 0.0 ? (rep.mse_x_only - rep.mse_tot) / denom : 0.0;
  return rep;
}

}  // namespace tot
