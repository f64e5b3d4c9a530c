#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tot/tape.hpp"
#include "tot/tensor.hpp"

namespace tot {

// Feed-forward stack: layer_sizes = [in, h1, ..., out], one activation per
// affine layer. Invariants: at least one layer, leaky slope in (0, 1].
struct MlpSpec {
  struct Act {
    bool leaky = true;      // false = identity
    double slope = 0.2;
  };
  std::vector<int> layer_sizes;
  std::vector<Act> activations;
  std::uint64_t seed = 0;

  int layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int in_dim() const { return layer_sizes.front(); }
  int out_dim() const { return layer_sizes.back(); }
  void validate() const;
};

// Hidden layers leaky(slope), final layer identity; the default shape for
// every sub-network in the model.
MlpSpec make_mlp(int in, const std::vector<int>& hidden, int out, double slope,
                 std::uint64_t seed);

// Fan-in-scaled uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], a pure
// function of spec.seed. Parameters are named <prefix>W0, <prefix>b0, ...
void init_mlp_params(const MlpSpec& spec, const std::string& prefix,
                     ParamStore& params);

Tensor mlp_forward(const MlpSpec& spec, const ParamStore& params,
                   const std::string& prefix, const Tensor& input);

// Value pass and directional-derivative (tangent) pass sharing one set of
// recorded pre-activations, so d(out)/d(input direction) is itself a node on
// the tape and can be differentiated w.r.t. the weights.
struct MlpVars {
  std::vector<Var> w, b;
};

MlpVars register_mlp(GradTape& tape, const MlpSpec& spec,
                     const ParamStore& params, const std::string& prefix);

struct MlpTapeOut {
  Var out;
  std::vector<Var> preacts;  // one per layer, before activation
};

MlpTapeOut mlp_forward_t(GradTape& tape, const MlpSpec& spec,
                         const MlpVars& vars, Var input);

Var mlp_tangent_t(GradTape& tape, const MlpSpec& spec, const MlpVars& vars,
                  const MlpTapeOut& fwd, Var tangent_in);

// Eager counterparts used by evaluation paths; same kernels, same rounding.
struct MlpEagerOut {
  Tensor out;
  std::vector<Tensor> preacts;
};

MlpEagerOut mlp_forward_eager(const MlpSpec& spec, const ParamStore& params,
                              const std::string& prefix, const Tensor& input);

Tensor mlp_tangent_eager(const MlpSpec& spec, const ParamStore& params,
                         const std::string& prefix, const MlpEagerOut& fwd,
                         const Tensor& tangent_in);

}  // namespace tot
