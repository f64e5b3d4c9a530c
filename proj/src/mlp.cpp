#include "tot/mlp.hpp"

#include <cmath>

#include "tot/common.hpp"
#include "tot/rng.hpp"

namespace tot {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw ConfigError("mlp needs at least one layer");
  for (int s : layer_sizes)
    if (s < 1) throw ConfigError("mlp layer size must be >= 1");
  if (activations.size() != static_cast<std::size_t>(layers()))
    throw ConfigError("mlp needs one activation per layer");
  for (const Act& a : activations)
    if (a.leaky && !(a.slope > 0.0 && a.slope <= 1.0))
      throw ConfigError("leaky slope must be in (0, 1]");
}

MlpSpec make_mlp(int in, const std::vector<int>& hidden, int out, double slope,
                 std::uint64_t seed) {
  MlpSpec spec;
  spec.layer_sizes.push_back(in);
  for (int h : hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(out);
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    MlpSpec::Act a;
    a.leaky = (l + 2 < spec.layer_sizes.size());  // final layer identity
    a.slope = slope;
    spec.activations.push_back(a);
  }
  spec.seed = seed;
  spec.validate();
  return spec;
}

void init_mlp_params(const MlpSpec& spec, const std::string& prefix,
                     ParamStore& params) {
  spec.validate();
  Rng rng(spec.seed);
  for (int l = 0; l < spec.layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.layer_sizes[l]);
    const auto out = static_cast<std::size_t>(spec.layer_sizes[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w = Tensor::zeros({out, in});
    for (auto& v : w.v) v = rng.uniform(-bound, bound);
    Tensor b = Tensor::zeros({out});
    for (auto& v : b.v) v = rng.uniform(-bound, bound);
    params.add(prefix + "W" + std::to_string(l), std::move(w));
    params.add(prefix + "b" + std::to_string(l), std::move(b));
  }
}

MlpVars register_mlp(GradTape& tape, const MlpSpec& spec,
                     const ParamStore& params, const std::string& prefix) {
  MlpVars vars;
  for (int l = 0; l < spec.layers(); ++l) {
    const std::string wn = prefix + "W" + std::to_string(l);
    const std::string bn = prefix + "b" + std::to_string(l);
    vars.w.push_back(tape.leaf(params.get(wn), wn));
    vars.b.push_back(tape.leaf(params.get(bn), bn));
  }
  return vars;
}

MlpTapeOut mlp_forward_t(GradTape& tape, const MlpSpec& spec,
                         const MlpVars& vars, Var input) {
  MlpTapeOut out;
  Var h = input;
  for (int l = 0; l < spec.layers(); ++l) {
    Var pre = tape.add(tape.matvec(vars.w[static_cast<std::size_t>(l)], h),
                       vars.b[static_cast<std::size_t>(l)]);
    out.preacts.push_back(pre);
    const MlpSpec::Act& a = spec.activations[static_cast<std::size_t>(l)];
    h = a.leaky ? tape.leaky_relu(pre, a.slope) : pre;
  }
  out.out = h;
  return out;
}

Var mlp_tangent_t(GradTape& tape, const MlpSpec& spec, const MlpVars& vars,
                  const MlpTapeOut& fwd, Var tangent_in) {
  Var t = tangent_in;
  for (int l = 0; l < spec.layers(); ++l) {
    t = tape.matvec(vars.w[static_cast<std::size_t>(l)], t);
    const MlpSpec::Act& a = spec.activations[static_cast<std::size_t>(l)];
    if (a.leaky)
      t = tape.leaky_mask_mul(fwd.preacts[static_cast<std::size_t>(l)], t,
                              a.slope);
  }
  return t;
}

namespace {
// Shared by eager and tape paths via identical loop structure: same kernel,
// same rounding, so both produce bitwise-equal outputs.
void matvec_kernel(const Tensor& w, const double* x, double* y) {
  const std::size_t m = w.shape[0], k = w.shape[1];
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = w.v.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}
}  // namespace

MlpEagerOut mlp_forward_eager(const MlpSpec& spec, const ParamStore& params,
                              const std::string& prefix, const Tensor& input) {
  if (input.size() != static_cast<std::size_t>(spec.in_dim()))
    throw DimensionError("mlp input size " + std::to_string(input.size()) +
                         " != " + std::to_string(spec.in_dim()));
  MlpEagerOut out;
  Tensor h = input;
  for (int l = 0; l < spec.layers(); ++l) {
    const Tensor& w = params.get(prefix + "W" + std::to_string(l));
    const Tensor& b = params.get(prefix + "b" + std::to_string(l));
    Tensor pre = Tensor::zeros({w.shape[0]});
    matvec_kernel(w, h.v.data(), pre.v.data());
    for (std::size_t i = 0; i < pre.size(); ++i) pre.v[i] += b.v[i];
    pre.validate();
    out.preacts.push_back(pre);
    const MlpSpec::Act& a = spec.activations[static_cast<std::size_t>(l)];
    if (a.leaky)
      for (auto& v : pre.v)
        if (v < 0) v *= a.slope;
    h = std::move(pre);
  }
  out.out = std::move(h);
  return out;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamStore& params,
                   const std::string& prefix, const Tensor& input) {
  return mlp_forward_eager(spec, params, prefix, input).out;
}

Tensor mlp_tangent_eager(const MlpSpec& spec, const ParamStore& params,
                         const std::string& prefix, const MlpEagerOut& fwd,
                         const Tensor& tangent_in) {
  Tensor t = tangent_in;
  for (int l = 0; l < spec.layers(); ++l) {
    const Tensor& w = params.get(prefix + "W" + std::to_string(l));
    Tensor next = Tensor::zeros({w.shape[0]});
    matvec_kernel(w, t.v.data(), next.v.data());
    const MlpSpec::Act& a = spec.activations[static_cast<std::size_t>(l)];
    if (a.leaky) {
      const Tensor& pre = fwd.preacts[static_cast<std::size_t>(l)];
      for (std::size_t i = 0; i < next.size(); ++i)
        if (pre.v[i] < 0) next.v[i] *= a.slope;
    }
    t = std::move(next);
  }
  return t;
}

}  // namespace tot
