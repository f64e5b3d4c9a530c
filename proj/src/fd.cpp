#include "tot/fd.hpp"

#include <cmath>

#include "tot/common.hpp"

namespace tot {

ParamStore fd_gradient(const std::function<double(const ParamStore&)>& loss_fn,
                       const ParamStore& params, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("fd_gradient: epsilon must be > 0");
  ParamStore work;
  for (std::size_t p = 0; p < params.size(); ++p)
    work.add(params.item(p).first, params.item(p).second);
  ParamStore grads;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::string& name = work.item(p).first;
    Tensor g = Tensor::zeros(work.item(p).second.shape);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double& coord = work.item(p).second.v[i];
      const double saved = coord;
      coord = saved + epsilon;
      const double up = loss_fn(work);
      coord = saved - epsilon;
      const double down = loss_fn(work);
      coord = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("fd_gradient: non-finite loss at " + name);
      g.v[i] = (up - down) / (2.0 * epsilon);
    }
    grads.add(name, std::move(g));
  }
  return grads;
}

double gradient_rel_error(const ParamStore& a, const ParamStore& b,
                          double floor) {
  if (a.size() != b.size())
    throw DimensionError("gradient_rel_error: store size mismatch");
  double max_diff = 0.0, max_a = 0.0, max_b = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const Tensor& ta = a.item(p).second;
    const Tensor& tb = b.get(a.item(p).first);
    if (!ta.same_shape(tb))
      throw DimensionError("gradient_rel_error: shape mismatch at " +
                           a.item(p).first);
    for (std::size_t i = 0; i < ta.size(); ++i) {
      max_diff = std::max(max_diff, std::fabs(ta.v[i] - tb.v[i]));
      max_a = std::max(max_a, std::fabs(ta.v[i]));
      max_b = std::max(max_b, std::fabs(tb.v[i]));
    }
  }
  return max_diff / std::max({max_a, max_b, floor});
}

}  // namespace tot
