#include "tot/tape.hpp"

#include <cmath>

#include "tot/common.hpp"

namespace tot {

void ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  t.validate();
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) != 0;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return items_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return items_[it->second].second;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

int GradTape::push(Node n) {
  // Shape consistency only: overflow values must flow through to the loss
  // terms, whose finiteness checks can name the offending term.
  std::size_t numel = 1;
  for (std::size_t d : n.val.shape) numel *= d;
  if (numel != n.val.v.size())
    throw DimensionError("tensor shape " + n.val.shape_str() +
                         " does not match " + std::to_string(n.val.v.size()) +
                         " values");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

GradTape::Node& GradTape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ConfigError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const GradTape::Node& GradTape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw ConfigError("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var GradTape::leaf(Tensor t, std::string name) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(t);
  n.needs_grad = true;
  n.name = std::move(name);
  return {push(std::move(n))};
}

Var GradTape::constant(Tensor t) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(t);
  return {push(std::move(n))};
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}
}  // namespace

Var GradTape::add(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  require_same_shape(na.val, nb.val, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = na.val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] += nb.val.v[i];
  return {push(std::move(n))};
}

Var GradTape::sub(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  require_same_shape(na.val, nb.val, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = na.val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] -= nb.val.v[i];
  return {push(std::move(n))};
}

Var GradTape::mul(Var a, Var b) {
  const Node &na = node(a), &nb = node(b);
  require_same_shape(na.val, nb.val, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.val = na.val;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] *= nb.val.v[i];
  return {push(std::move(n))};
}

Var GradTape::scale_shift(Var x, double scale, double shift) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::ScaleShift;
  n.a = x.id;
  n.p0 = scale;
  n.p1 = shift;
  n.needs_grad = nx.needs_grad;
  n.val = nx.val;
  for (auto& v : n.val.v) v = scale * v + shift;
  return {push(std::move(n))};
}

Var GradTape::matvec(Var w, Var x) {
  const Node &nw = node(w), &nx = node(x);
  if (nw.val.shape.size() != 2 || nx.val.shape.size() != 1 ||
      nw.val.shape[1] != nx.val.shape[0])
    throw DimensionError("matvec: " + nw.val.shape_str() + " * " +
                         nx.val.shape_str());
  const std::size_t m = nw.val.shape[0], k = nw.val.shape[1];
  Node n;
  n.op = Op::MatVec;
  n.a = w.id;
  n.b = x.id;
  n.needs_grad = nw.needs_grad || nx.needs_grad;
  n.val = Tensor::zeros({m});
  const double* W = nw.val.v.data();
  const double* X = nx.val.v.data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = W + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * X[j];
    n.val.v[i] = acc;
  }
  return {push(std::move(n))};
}

Var GradTape::exp(Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::Exp;
  n.a = x.id;
  n.needs_grad = nx.needs_grad;
  n.val = nx.val;
  for (auto& v : n.val.v) v = std::exp(v);
  return {push(std::move(n))};
}

Var GradTape::leaky_relu(Var x, double slope) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::LeakyRelu;
  n.a = x.id;
  n.p0 = slope;
  n.needs_grad = nx.needs_grad;
  n.val = nx.val;
  for (auto& v : n.val.v)
    if (v < 0) v *= slope;
  return {push(std::move(n))};
}

Var GradTape::leaky_mask_mul(Var preact, Var tangent, double slope) {
  const Node &np = node(preact), &nt = node(tangent);
  require_same_shape(np.val, nt.val, "leaky_mask_mul");
  Node n;
  n.op = Op::LeakyMaskMul;
  n.a = preact.id;
  n.b = tangent.id;
  n.p0 = slope;
  n.needs_grad = np.needs_grad || nt.needs_grad;
  n.val = nt.val;
  for (std::size_t i = 0; i < n.val.size(); ++i)
    if (np.val.v[i] < 0) n.val.v[i] *= slope;
  return {push(std::move(n))};
}

Var GradTape::log_abs_guard(Var x, double guard) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::LogAbsGuard;
  n.a = x.id;
  n.p0 = guard;
  n.needs_grad = nx.needs_grad;
  n.val = nx.val;
  for (auto& v : n.val.v) {
    double a = std::fabs(v);
    if (a < guard) {
      a = guard;
      ++guard_hits_;
    }
    v = std::log(a);
  }
  return {push(std::move(n))};
}

Var GradTape::abs(Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::Abs;
  n.a = x.id;
  n.needs_grad = nx.needs_grad;
  n.val = nx.val;
  for (auto& v : n.val.v) v = std::fabs(v);
  return {push(std::move(n))};
}

Var GradTape::sum(Var x) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::Sum;
  n.a = x.id;
  n.needs_grad = nx.needs_grad;
  double acc = 0.0;
  for (double v : nx.val.v) acc += v;
  // Raw construction: an overflowed sum must reach the loss-term finiteness
  // checks rather than fail inside the kernel.
  n.val.shape = {1};
  n.val.v = {acc};
  return {push(std::move(n))};
}

Var GradTape::slice(Var x, std::size_t offset, std::size_t len) {
  const Node& nx = node(x);
  if (offset + len > nx.val.size())
    throw DimensionError("slice out of range");
  Node n;
  n.op = Op::Slice;
  n.a = x.id;
  n.i0 = offset;
  n.needs_grad = nx.needs_grad;
  n.val = Tensor::zeros({len});
  for (std::size_t i = 0; i < len; ++i) n.val.v[i] = nx.val.v[offset + i];
  return {push(std::move(n))};
}

Var GradTape::concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw DimensionError("concat of nothing");
  Node n;
  n.op = Op::Concat;
  std::size_t total = 0;
  for (Var v : xs) {
    n.needs_grad = n.needs_grad || node(v).needs_grad;
    total += node(v).val.size();
    n.srcs.push_back(v.id);
  }
  n.val = Tensor::zeros({total});
  std::size_t off = 0;
  for (Var v : xs) {
    const Tensor& t = node(v).val;
    for (std::size_t i = 0; i < t.size(); ++i) n.val.v[off + i] = t.v[i];
    off += t.size();
  }
  return {push(std::move(n))};
}

const Tensor& GradTape::value(Var v) const { return node(v).val; }

double GradTape::scalar_value(Var v) const {
  const Tensor& t = node(v).val;
  if (t.size() != 1) throw DimensionError("scalar_value on " + t.shape_str());
  return t.v[0];
}

void GradTape::ensure_grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_set) {
    n.grad = Tensor::zeros(n.val.shape);
    n.grad_set = true;
  }
}

void GradTape::run_backward(Var out, const Tensor& seed) {
  Node& no = node(out);
  if (!seed.same_shape(no.val))
    throw DimensionError("backward seed shape " + seed.shape_str() +
                         " does not match output " + no.val.shape_str());
  // Drop adjoints from any earlier sweep so each backward call stands alone;
  // term nodes of one graph can then be differentiated independently.
  for (Node& n : nodes_) n.grad_set = false;
  ensure_grad(out.id);
  no.grad = seed;

  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || !n.grad_set) continue;
    const std::vector<double>& g = n.grad.v;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Add: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (nodes_[n.b].needs_grad) {
          ensure_grad(n.b);
          auto& gb = nodes_[n.b].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (nodes_[n.b].needs_grad) {
          ensure_grad(n.b);
          auto& gb = nodes_[n.b].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const auto& av = nodes_[n.a].val.v;
        const auto& bv = nodes_[n.b].val.v;
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (nodes_[n.b].needs_grad) {
          ensure_grad(n.b);
          auto& gb = nodes_[n.b].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::ScaleShift: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.p0 * g[i];
        }
        break;
      }
      case Op::MatVec: {
        Node& nw = nodes_[n.a];
        Node& nx = nodes_[n.b];
        const std::size_t m = nw.val.shape[0], k = nw.val.shape[1];
        if (nw.needs_grad) {
          ensure_grad(n.a);
          auto& gw = nw.grad.v;
          const auto& xv = nx.val.v;
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            double* row = gw.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * xv[j];
          }
        }
        if (nx.needs_grad) {
          ensure_grad(n.b);
          auto& gx = nx.grad.v;
          const auto& wv = nw.val.v;
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            const double* row = wv.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) gx[j] += gi * row[j];
          }
        }
        break;
      }
      case Op::Exp: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val.v[i];
        }
        break;
      }
      case Op::LeakyRelu: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          const auto& xv = nodes_[n.a].val.v;
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * (xv[i] >= 0 ? 1.0 : n.p0);
        }
        break;
      }
      case Op::LeakyMaskMul: {
        // d/d(preact) is zero almost everywhere and dropped by construction.
        if (nodes_[n.b].needs_grad) {
          ensure_grad(n.b);
          auto& gt = nodes_[n.b].grad.v;
          const auto& pv = nodes_[n.a].val.v;
          for (std::size_t i = 0; i < g.size(); ++i)
            gt[i] += g[i] * (pv[i] >= 0 ? 1.0 : n.p0);
        }
        break;
      }
      case Op::LogAbsGuard: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          const auto& xv = nodes_[n.a].val.v;
          for (std::size_t i = 0; i < g.size(); ++i)
            if (std::fabs(xv[i]) >= n.p0) ga[i] += g[i] / xv[i];
        }
        break;
      }
      case Op::Abs: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          const auto& xv = nodes_[n.a].val.v;
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * (xv[i] > 0 ? 1.0 : xv[i] < 0 ? -1.0 : 0.0);
        }
        break;
      }
      case Op::Sum: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          const double gs = g[0];
          for (auto& v : ga) v += gs;
        }
        break;
      }
      case Op::Slice: {
        if (nodes_[n.a].needs_grad) {
          ensure_grad(n.a);
          auto& ga = nodes_[n.a].grad.v;
          for (std::size_t i = 0; i < g.size(); ++i) ga[n.i0 + i] += g[i];
        }
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (int src : n.srcs) {
          Node& ns = nodes_[static_cast<std::size_t>(src)];
          if (ns.needs_grad) {
            ensure_grad(src);
            auto& gs = ns.grad.v;
            for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += g[off + i];
          }
          off += ns.val.size();
        }
        break;
      }
    }
  }
}

ParamStore GradTape::backward(Var out, const Tensor& seed) {
  run_backward(out, seed);
  ParamStore grads;
  for (const Node& n : nodes_) {
    if (n.op != Op::Leaf || n.name.empty()) continue;
    if (n.grad_set) {
      Tensor g = n.grad;
      g.validate();
      grads.add(n.name, std::move(g));
    } else {
      grads.add(n.name, Tensor::zeros(n.val.shape));
    }
  }
  return grads;
}

ParamStore GradTape::backward(Var out) {
  return backward(out, Tensor::scalar(1.0));
}

void GradTape::backward_into(Var out, const Tensor& seed,
                             const std::vector<Var>& leaves,
                             std::vector<Tensor>& grads) {
  run_backward(out, seed);
  grads.resize(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Node& n = node(leaves[i]);
    if (n.grad_set) {
      grads[i] = n.grad;
      grads[i].validate();
    } else {
      grads[i] = Tensor::zeros(n.val.shape);
    }
  }
}

void GradTape::reset() {
  nodes_.clear();
  guard_hits_ = 0;
}

}  // namespace tot
