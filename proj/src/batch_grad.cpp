#include "tot/batch_grad.hpp"

#include <exception>
#include <string>

#include "tot/common.hpp"

namespace tot {
namespace {

Tensor window_rows(const Tensor& series, std::int64_t start, std::size_t T) {
  const std::size_t n = series.cols();
  if (start < 0 || static_cast<std::size_t>(start) + T > series.rows())
    throw ConfigError("window start " + std::to_string(start) +
                      " out of range for series of " +
                      std::to_string(series.rows()) + " rows");
  Tensor out = Tensor::zeros({T, n});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j)
      out.at(t, j) = series.at(static_cast<std::size_t>(start) + t, j);
  return out;
}

struct WindowOut {
  std::vector<Tensor> grads;
  LossBreakdown values;
  double ls_sum = 0.0;
  int guard_hits = 0;
};

WindowOut eval_window(const TotModel& m, const Tensor& x_series,
                      const BatchWindow& bw, const LossWeights& w,
                      double ls_denom, double seed_scale) {
  const std::size_t T = static_cast<std::size_t>(m.cfg.window());
  GradTape tape;
  ModelVars vars = register_model(tape, m);
  WindowGraph g = build_window_graph(tape, m, vars, window_rows(x_series, bw.start, T),
                                     bw.noise, bw.sparsity_steps, w, ls_denom);
  WindowOut out;
  tape.backward_into(g.total, Tensor::scalar(seed_scale), vars.leaves, out.grads);
  out.values = g.values;
  out.ls_sum = tape.scalar_value(g.ls_sum);
  out.guard_hits = tape.guard_hits();
  return out;
}

BatchGrad reduce_in_order(const TotModel& m, const std::vector<WindowOut>& outs,
                          std::size_t total_sparsity) {
  const std::size_t B = outs.size();
  BatchGrad r;
  r.grads.reserve(m.params.size());
  for (std::size_t p = 0; p < m.params.size(); ++p)
    r.grads.push_back(Tensor::zeros(m.params.item(p).second.shape));
  double ls_total = 0.0;
  for (std::size_t wi = 0; wi < B; ++wi) {
    const WindowOut& o = outs[wi];
    for (std::size_t p = 0; p < r.grads.size(); ++p) {
      const Tensor& src = o.grads[p];
      Tensor& dst = r.grads[p];
      for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += src.v[k];
    }
    r.mean.l_y += o.values.l_y;
    r.mean.l_r += o.values.l_r;
    r.mean.l_kl_z += o.values.l_kl_z;
    r.mean.l_kl_o += o.values.l_kl_o;
    r.mean.total += o.values.total;
    ls_total += o.ls_sum;
    r.guard_hits += o.guard_hits;
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  r.mean.l_y *= inv_b;
  r.mean.l_r *= inv_b;
  r.mean.l_kl_z *= inv_b;
  r.mean.l_kl_o *= inv_b;
  r.mean.total *= inv_b;
  r.mean.l_s = total_sparsity == 0
                   ? 0.0
                   : ls_total / static_cast<double>(total_sparsity);
  return r;
}

std::size_t sparsity_total(const std::vector<BatchWindow>& windows) {
  std::size_t s = 0;
  for (const BatchWindow& w : windows) s += w.sparsity_steps.size();
  return s;
}

}  // namespace

BatchGrad batch_gradient_serial(const TotModel& m, const Tensor& x_series,
                                const std::vector<BatchWindow>& windows,
                                const LossWeights& w) {
  if (windows.empty()) throw ConfigError("batch must contain at least one window");
  const std::size_t B = windows.size();
  const std::size_t S = sparsity_total(windows);
  const double ls_denom = S == 0 ? 0.0 : static_cast<double>(S) / static_cast<double>(B);
  std::vector<WindowOut> outs(B);
  for (std::size_t wi = 0; wi < B; ++wi)
    outs[wi] = eval_window(m, x_series, windows[wi], w, ls_denom,
                           1.0 / static_cast<double>(B));
  return reduce_in_order(m, outs, S);
}

BatchGrad batch_gradient_parallel(const TotModel& m, const Tensor& x_series,
                                  const std::vector<BatchWindow>& windows,
                                  const LossWeights& w) {
  if (windows.empty()) throw ConfigError("batch must contain at least one window");
  const std::size_t B = windows.size();
  const std::size_t S = sparsity_total(windows);
  const double ls_denom = S == 0 ? 0.0 : static_cast<double>(S) / static_cast<double>(B);
  std::vector<WindowOut> outs(B);
  // Per-window tapes are independent; any error is stashed and rethrown after
  // the parallel region since exceptions must not cross it.
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t wi = 0; wi < static_cast<std::int64_t>(B); ++wi) {
    try {
      outs[static_cast<std::size_t>(wi)] =
          eval_window(m, x_series, windows[static_cast<std::size_t>(wi)], w,
                      ls_denom, 1.0 / static_cast<double>(B));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return reduce_in_order(m, outs, S);
}

BatchGrad batch_gradient(const TotModel& m, const Tensor& x_series,
                         const std::vector<BatchWindow>& windows,
                         const LossWeights& w, bool parallel) {
  return parallel ? batch_gradient_parallel(m, x_series, windows, w)
                  : batch_gradient_serial(m, x_series, windows, w);
}

}  // namespace tot
