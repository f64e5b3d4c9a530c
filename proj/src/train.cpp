#include "tot/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tot/common.hpp"
#include "tot/objective.hpp"

namespace tot {
namespace {

Tensor draw_window_noise(std::size_t T, std::size_t n, Rng& rng) {
  Tensor noise = Tensor::zeros({T, n});
  for (double& v : noise.v) v = rng.normal();
  return noise;
}

std::vector<std::int64_t> shuffled_starts(std::int64_t first, std::int64_t count,
                                          Rng& rng) {
  std::vector<std::int64_t> starts(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i)
    starts[static_cast<std::size_t>(i)] = first + i;
  for (std::size_t i = starts.size(); i > 1; --i)
    std::swap(starts[i - 1], starts[rng.below(i)]);
  return starts;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (online_steps_per_arrival < 0)
    throw ConfigError("train.online_steps_per_arrival must be >= 0");
  if (sparsity_samples_per_batch < 0)
    throw ConfigError("train.sparsity_samples_per_batch must be >= 0");
  if (windows_per_epoch < 0)
    throw ConfigError("train.windows_per_epoch must be >= 0");
  weights.validate();
}

TrainHistory train_offline(const Dataset& ds, TotModel& model,
                           const TrainConfig& cfg, AdamState& adam,
                           TrainCounters& counters) {
  cfg.validate();
  ds.config.validate();
  if (ds.config.n != model.cfg.n)
    throw ConfigError("dataset has n=" + std::to_string(ds.config.n) +
                      " but model expects n=" + std::to_string(model.cfg.n));
  const std::int64_t T = model.cfg.window();
  const std::int64_t n_windows = ds.train_end - ds.train_begin - T + 1;
  if (n_windows < 1)
    throw ConfigError("training slice shorter than one window of " +
                      std::to_string(T) + " steps");
  if (adam.m.size() != model.params.size())
    throw DimensionError("optimizer state does not match model parameters");

  const AdamHyper hyper{cfg.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t Ts = static_cast<std::size_t>(T);
  const std::size_t ns = static_cast<std::size_t>(model.cfg.n);
  TrainHistory hist;

  for (std::int64_t epoch = counters.epoch; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(sub_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch), 0, 0));
    std::vector<std::int64_t> starts =
        shuffled_starts(ds.train_begin, n_windows, shuffle_rng);
    if (cfg.windows_per_epoch > 0 &&
        static_cast<std::int64_t>(starts.size()) > cfg.windows_per_epoch)
      starts.resize(static_cast<std::size_t>(cfg.windows_per_epoch));

    EpochStats stats;
    std::int64_t batches = 0;
    for (std::size_t off = 0; off < starts.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t B = std::min(starts.size() - off,
                                     static_cast<std::size_t>(cfg.batch_size));
      std::vector<BatchWindow> batch(B);
      for (std::size_t r = 0; r < B; ++r) {
        batch[r].start = starts[off + r];
        Rng noise_rng(sub_seed(cfg.seed, "noise", static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(batch[r].start), 0));
        batch[r].noise = draw_window_noise(Ts, ns, noise_rng);
      }
      Rng sp_rng(sub_seed(cfg.seed, "sparsity", static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(batches), 0));
      for (int k = 0; k < cfg.sparsity_samples_per_batch; ++k) {
        const std::size_t wi = sp_rng.below(B);
        batch[wi].sparsity_steps.push_back(static_cast<int>(sp_rng.below(Ts)));
      }

      BatchGrad bg = batch_gradient(model, ds.x, batch, cfg.weights, cfg.parallel);
      const double norm = clip_grad_norm(bg.grads, cfg.grad_clip);
      adam_step(model.params, bg.grads, adam, hyper);
      ++counters.global_step;
      ++batches;
      stats.mean.l_y += bg.mean.l_y;
      stats.mean.l_r += bg.mean.l_r;
      stats.mean.l_kl_z += bg.mean.l_kl_z;
      stats.mean.l_kl_o += bg.mean.l_kl_o;
      stats.mean.l_s += bg.mean.l_s;
      stats.mean.total += bg.mean.total;
      stats.grad_norm_mean += norm;
      stats.guard_hits += bg.guard_hits;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      stats.mean.l_y *= inv;
      stats.mean.l_r *= inv;
      stats.mean.l_kl_z *= inv;
      stats.mean.l_kl_o *= inv;
      stats.mean.l_s *= inv;
      stats.mean.total *= inv;
      stats.grad_norm_mean *= inv;
    }
    counters.epoch = epoch + 1;
    hist.epochs.push_back(stats);
  }
  return hist;
}

TrainHistory train_offline(const Dataset& ds, TotModel& model,
                           const TrainConfig& cfg) {
  AdamState adam = AdamState::init_like(model.params);
  TrainCounters counters;
  return train_offline(ds, model, cfg, adam, counters);
}

OnlineResult online_run(const Dataset& ds, TotModel& model,
                        const TrainConfig& cfg, AdamState& adam,
                        TrainCounters& counters, std::int64_t begin_arrival,
                        std::int64_t end_arrival) {
  cfg.validate();
  ds.config.validate();
  if (ds.config.n != model.cfg.n)
    throw ConfigError("dataset has n=" + std::to_string(ds.config.n) +
                      " but model expects n=" + std::to_string(model.cfg.n));
  const std::int64_t T = model.cfg.window();
  const std::int64_t t_in = model.cfg.t_in;
  const std::int64_t H = model.cfg.horizon;
  const std::int64_t total = ds.config.total_steps;
  if (begin_arrival < 0) begin_arrival = t_in - 1;
  if (end_arrival < 0) end_arrival = total - H;
  if (begin_arrival < t_in - 1)
    throw ConfigError("online arrivals need t_in observed steps of history");
  if (end_arrival > total - H)
    throw ConfigError("online arrivals need horizon future steps for scoring");
  if (begin_arrival >= end_arrival)
    throw ConfigError("online arrival range is empty");
  if (adam.m.size() != model.params.size())
    throw DimensionError("optimizer state does not match model parameters");

  const AdamHyper hyper{cfg.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t Ts = static_cast<std::size_t>(T);
  const std::size_t ns = static_cast<std::size_t>(model.cfg.n);
  OnlineResult res;
  double sum_mse = 0.0, sum_mae = 0.0;

  for (std::int64_t t = begin_arrival; t < end_arrival; ++t) {
    // Forecast first: only data up to and including step t is touched.
    Tensor x_hist = Tensor::zeros({static_cast<std::size_t>(t_in), ns});
    for (std::int64_t r = 0; r < t_in; ++r)
      for (std::size_t j = 0; j < ns; ++j)
        x_hist.at(static_cast<std::size_t>(r), j) =
            ds.x.at(static_cast<std::size_t>(t - t_in + 1 + r), j);
    Tensor zero_noise = Tensor::zeros({Ts, ns});
    EncoderOutput enc = encode(model, x_hist, zero_noise);
    Tensor z_future = Tensor::zeros({static_cast<std::size_t>(H), ns});
    for (std::int64_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < ns; ++j)
        z_future.at(static_cast<std::size_t>(h), j) =
            enc.sample.at(static_cast<std::size_t>(t_in + h), j);
    Tensor pred = forecast(model, z_future, x_hist);

    OnlineRow row;
    row.arrival = t;
    double se = 0.0, ae = 0.0;
    for (std::int64_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < ns; ++j) {
        const double d = pred.at(static_cast<std::size_t>(h), j) -
                         ds.x.at(static_cast<std::size_t>(t + 1 + h), j);
        se += d * d;
        ae += std::abs(d);
      }
    row.mse = se / static_cast<double>(H * static_cast<std::int64_t>(ns));
    row.mae = ae / static_cast<double>(H * static_cast<std::int64_t>(ns));
    sum_mse += row.mse;
    sum_mae += row.mae;
    const double seen = static_cast<double>(t - begin_arrival + 1);
    row.cum_mse = sum_mse / seen;
    row.cum_mae = sum_mae / seen;

    // Then adapt on the most recent complete window.
    if (t >= T - 1) {
      for (int k = 0; k < cfg.online_steps_per_arrival; ++k) {
        std::vector<BatchWindow> batch(1);
        batch[0].start = t - T + 1;
        Rng noise_rng(sub_seed(cfg.seed, "online-noise", static_cast<std::uint64_t>(t),
                               static_cast<std::uint64_t>(k), 0));
        batch[0].noise = draw_window_noise(Ts, ns, noise_rng);
        Rng sp_rng(sub_seed(cfg.seed, "online-sparsity", static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(k), 0));
        for (int s = 0; s < cfg.sparsity_samples_per_batch; ++s)
          batch[0].sparsity_steps.push_back(static_cast<int>(sp_rng.below(Ts)));
        BatchGrad bg = batch_gradient(model, ds.x, batch, cfg.weights, cfg.parallel);
        clip_grad_norm(bg.grads, cfg.grad_clip);
        adam_step(model.params, bg.grads, adam, hyper);
        ++counters.global_step;
        row.adapt = bg.mean;
      }
    }
    res.rows.push_back(row);
  }
  const double count = static_cast<double>(res.rows.size());
  res.mean_mse = sum_mse / count;
  res.mean_mae = sum_mae / count;
  return res;
}

OnlineResult online_run(const Dataset& ds, TotModel& model,
                        const TrainConfig& cfg) {
  AdamState adam = AdamState::init_like(model.params);
  TrainCounters counters;
  return online_run(ds, model, cfg, adam, counters);
}

}  // namespace tot
