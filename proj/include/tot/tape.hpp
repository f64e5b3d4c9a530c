#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tot/tensor.hpp"

namespace tot {

// Named parameter tensors with stable insertion-order iteration. Names are
// unique; iteration order is deterministic given insertion order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return items_.size(); }
  const std::pair<std::string, Tensor>& item(std::size_t i) const {
    return items_[i];
  }
  std::pair<std::string, Tensor>& item(std::size_t i) { return items_[i]; }
  std::size_t index_of(const std::string& name) const;
  std::size_t total_scalars() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape at tensor granularity. Nodes are appended in evaluation
// order, so a single reverse sweep visits each node exactly once and
// accumulates gradients additively into parents.
class GradTape {
 public:
  enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    ScaleShift,
    MatVec,
    Exp,
    LeakyRelu,
    LeakyMaskMul,
    LogAbsGuard,
    Abs,
    Sum,
    Slice,
    Concat,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    double p0 = 0.0, p1 = 0.0;
    std::size_t i0 = 0;
    std::vector<int> srcs;  // Concat only
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    bool grad_set = false;
    std::string name;  // Leaf only
  };

  Var leaf(Tensor t, std::string name);
  Var constant(Tensor t);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // y = p0 * x + p1, elementwise.
  Var scale_shift(Var x, double scale, double shift);
  // W: [m, n], x: [n] -> [m].
  Var matvec(Var w, Var x);
  Var exp(Var x);
  Var leaky_relu(Var x, double slope);
  // Tangent propagation through LeakyReLU: mask(preact) * tangent, where the
  // mask derivative w.r.t. preact is zero almost everywhere and dropped.
  Var leaky_mask_mul(Var preact, Var tangent, double slope);
  // log(max(|x|, guard)); counts guard hits (singular-Jacobian warnings).
  Var log_abs_guard(Var x, double guard);
  Var abs(Var x);
  Var sum(Var x);
  Var slice(Var x, std::size_t offset, std::size_t len);
  Var concat(const std::vector<Var>& xs);

  const Tensor& value(Var v) const;
  double scalar_value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }
  int guard_hits() const { return guard_hits_; }

  // Reverse sweep from `out` seeded with `seed` (shape must match out).
  // Returns d(out)/d(leaf) for every named leaf on the tape; untouched leaves
  // report zero gradients.
  ParamStore backward(Var out, const Tensor& seed);
  ParamStore backward(Var out);  // scalar out, seed = 1

  // Same sweep but reads gradients for specific leaves into an aligned vector
  // (zeros where untouched). Used by the batch kernels.
  void backward_into(Var out, const Tensor& seed, const std::vector<Var>& leaves,
                     std::vector<Tensor>& grads);

  void reset();
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  int push(Node n);
  Node& node(Var v);
  const Node& node(Var v) const;
  void ensure_grad(int id);
  void accum(int id, const std::vector<double>& g);
  void run_backward(Var out, const Tensor& seed);

  std::vector<Node> nodes_;
  int guard_hits_ = 0;
};

}  // namespace tot
