#include "tot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tot/common.hpp"
#include "tot/hungarian.hpp"

namespace tot {
namespace {

Tensor window_rows(const Tensor& series, std::int64_t start, std::size_t rows) {
  Tensor out = Tensor::zeros({rows, series.cols()});
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t j = 0; j < series.cols(); ++j)
      out.at(t, j) = series.at(static_cast<std::size_t>(start) + t, j);
  return out;
}

}  // namespace

MccReport mcc(const Tensor& z_true, const Tensor& z_est) {
  if (!z_true.same_shape(z_est))
    throw DimensionError("mcc: shapes disagree, " + z_true.shape_str() + " vs " +
                         z_est.shape_str());
  const std::size_t N = z_true.rows(), n = z_true.cols();
  if (N < 2 || n < 1) throw DimensionError("mcc: need at least 2 rows");

  auto column_stats = [N](const Tensor& t, std::size_t c, double& mean, double& sd) {
    mean = 0.0;
    for (std::size_t r = 0; r < N; ++r) mean += t.at(r, c);
    mean /= static_cast<double>(N);
    double acc = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
      const double d = t.at(r, c) - mean;
      acc += d * d;
    }
    sd = std::sqrt(acc / static_cast<double>(N));
  };

  std::vector<double> mt(n), st(n), me(n), se(n);
  for (std::size_t c = 0; c < n; ++c) {
    column_stats(z_true, c, mt[c], st[c]);
    column_stats(z_est, c, me[c], se[c]);
  }

  MccReport rep;
  rep.abs_corr = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (st[i] == 0.0 || se[j] == 0.0) continue;
      double cov = 0.0;
      for (std::size_t r = 0; r < N; ++r)
        cov += (z_true.at(r, i) - mt[i]) * (z_est.at(r, j) - me[j]);
      cov /= static_cast<double>(N);
      rep.abs_corr.at(i, j) = std::abs(cov / (st[i] * se[j]));
    }

  rep.assignment = max_sum_assignment(rep.abs_corr);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += rep.abs_corr.at(i, static_cast<std::size_t>(rep.assignment[i]));
  rep.score = acc / static_cast<double>(n);
  return rep;
}

ForecastMetrics forecast_metrics(const Tensor& pred, const Tensor& truth) {
  if (!pred.same_shape(truth))
    throw DimensionError("forecast_metrics: shapes disagree");
  if (pred.size() == 0) throw DimensionError("forecast_metrics: empty input");
  ForecastMetrics fm;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred.v[k] - truth.v[k];
    fm.mse += d * d;
    fm.mae += std::abs(d);
  }
  fm.mse /= static_cast<double>(pred.size());
  fm.mae /= static_cast<double>(pred.size());
  return fm;
}

Tensor encode_series(const TotModel& m, const Dataset& ds, std::int64_t begin,
                     std::int64_t end) {
  const std::int64_t t_in = m.cfg.t_in;
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (ds.config.n != m.cfg.n)
    throw ConfigError("encode_series: dataset and model disagree on n");
  if (begin < t_in - 1)
    throw ConfigError("encode_series: begin must leave t_in steps of history");
  if (end > ds.config.total_steps || begin >= end)
    throw ConfigError("encode_series: empty or out-of-range interval");

  const std::size_t T = static_cast<std::size_t>(m.cfg.window());
  Tensor zero_noise = Tensor::zeros({T, n});
  Tensor out = Tensor::zeros({static_cast<std::size_t>(end - begin), n});
  for (std::int64_t s = begin; s < end; ++s) {
    Tensor hist = window_rows(ds.x, s - t_in + 1, static_cast<std::size_t>(t_in));
    EncoderOutput enc = encode(m, hist, zero_noise);
    for (std::size_t j = 0; j < n; ++j)
      out.at(static_cast<std::size_t>(s - begin), j) =
          enc.mean.at(static_cast<std::size_t>(t_in - 1), j);
  }
  return out;
}

ForecastMetrics validation_forecast_metrics(const TotModel& m, const Dataset& ds) {
  const std::int64_t T = m.cfg.window();
  const std::int64_t t_in = m.cfg.t_in;
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);
  if (ds.config.n != m.cfg.n)
    throw ConfigError("validation_forecast_metrics: dataset and model disagree on n");
  const std::int64_t last_start = ds.val_end - T;
  if (last_start < ds.val_begin)
    throw ConfigError("validation slice shorter than one window");

  const std::size_t H = static_cast<std::size_t>(m.cfg.horizon);
  Tensor zero_noise = Tensor::zeros({static_cast<std::size_t>(T), n});
  ForecastMetrics acc;
  std::int64_t count = 0;
  for (std::int64_t start = ds.val_begin; start <= last_start; ++start) {
    Tensor hist = window_rows(ds.x, start, static_cast<std::size_t>(t_in));
    EncoderOutput enc = encode(m, hist, zero_noise);
    Tensor z_future = Tensor::zeros({H, n});
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < n; ++j)
        z_future.at(h, j) = enc.sample.at(static_cast<std::size_t>(t_in) + h, j);
    Tensor pred = forecast(m, z_future, hist);
    Tensor truth = window_rows(ds.x, start + t_in, H);
    ForecastMetrics fm = forecast_metrics(pred, truth);
    acc.mse += fm.mse;
    acc.mae += fm.mae;
    ++count;
  }
  acc.mse /= static_cast<double>(count);
  acc.mae /= static_cast<double>(count);
  return acc;
}

double validation_forecast_mse(const TotModel& m, const Dataset& ds) {
  return validation_forecast_metrics(m, ds).mse;
}

SupportRecovery jacobian_support_f1(const TotModel& m, const Dataset& ds,
                                    int sample_steps, double threshold_frac) {
  if (sample_steps < 1) throw ConfigError("support recovery needs sample_steps >= 1");
  if (!(threshold_frac > 0.0) || threshold_frac >= 1.0)
    throw ConfigError("threshold_frac must be in (0, 1)");
  const std::size_t n = static_cast<std::size_t>(m.cfg.n);

  const std::int64_t begin = std::max<std::int64_t>(ds.val_begin, m.cfg.t_in - 1);
  const std::int64_t end = ds.val_end;
  Tensor est = encode_series(m, ds, begin, end);
  Tensor truth = window_rows(ds.z, begin, est.rows());
  MccReport match = mcc(truth, est);

  SupportRecovery rec;
  rec.mean_abs_jac = Tensor::zeros({n, n});
  const std::int64_t rows = static_cast<std::int64_t>(est.rows());
  const std::int64_t stride = std::max<std::int64_t>(1, rows / sample_steps);
  std::int64_t used = 0;
  for (std::int64_t r = 0; r < rows && used < sample_steps; r += stride, ++used) {
    Tensor z = Tensor::zeros({n});
    for (std::size_t j = 0; j < n; ++j) z.v[j] = est.at(static_cast<std::size_t>(r), j);
    Tensor jac = decoder_jacobian(m, z);
    for (std::size_t ti = 0; ti < n; ++ti) {
      const std::size_t ei = static_cast<std::size_t>(match.assignment[ti]);
      for (std::size_t obs = 0; obs < n; ++obs)
        rec.mean_abs_jac.at(ti, obs) += std::abs(jac.at(obs, ei));
    }
  }
  for (double& v : rec.mean_abs_jac.v) v /= static_cast<double>(used);

  double peak = 0.0;
  for (double v : rec.mean_abs_jac.v) peak = std::max(peak, v);
  const double threshold = threshold_frac * peak;

  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const bool pred = rec.mean_abs_jac.at(i, j) > threshold;
      bool actual = true;
      if (ds.gen.mixing.has_mask)
        actual = ds.gen.mixing.mask[i * n + j] != 0;
      if (pred && actual) ++tp;
      else if (pred && !actual) ++fp;
      else if (!pred && actual) ++fn;
    }
  rec.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  rec.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  rec.f1 = (rec.precision + rec.recall) == 0.0
               ? 0.0
               : 2.0 * rec.precision * rec.recall / (rec.precision + rec.recall);
  return rec;
}

}  // namespace tot
