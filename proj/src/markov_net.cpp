#include "tot/markov_net.hpp"

#include <algorithm>

#include "tot/common.hpp"

namespace tot {
namespace {

// Vertex layout: [0,n) z_{t-1}, [n,2n) x_{t-1}, [2n,3n) z_t, [3n,4n) x_t,
// [4n,5n) obs noise at t, [5n,6n) obs noise at t-1.
struct Graph {
  int n_vertices;
  std::vector<std::uint8_t> adj;  // row-major symmetric, no self loops

  explicit Graph(int n) : n_vertices(n), adj(static_cast<std::size_t>(n) * n, 0) {}
  void connect(int a, int b) {
    if (a == b) return;
    adj[static_cast<std::size_t>(a) * n_vertices + b] = 1;
    adj[static_cast<std::size_t>(b) * n_vertices + a] = 1;
  }
  bool connected(int a, int b) const {
    return adj[static_cast<std::size_t>(a) * n_vertices + b] != 0;
  }
};

}  // namespace

IntimateReport check_sparse_mixing_assumption(const std::vector<std::uint8_t>& mask,
                                              int n, bool obs_edges) {
  if (n < 1) throw ConfigError("latent dimension must be >= 1");
  if (mask.size() != static_cast<std::size_t>(n) * n)
    throw DimensionError("mask must have n*n entries");

  const auto m = [&](int i, int j) { return mask[static_cast<std::size_t>(i) * n + j] != 0; };
  const int z1 = 0, x1 = n, z2 = 2 * n, x2 = 3 * n, e2 = 4 * n, e1 = 5 * n;
  Graph g(6 * n);

  std::vector<std::vector<int>> parents(static_cast<std::size_t>(6) * n);
  for (int i = 0; i < n; ++i) {
    // z_{t,i}: all z_{t-1} plus instantaneous predecessors.
    for (int a = 0; a < n; ++a) parents[z2 + i].push_back(z1 + a);
    for (int j = 0; j < i; ++j) parents[z2 + i].push_back(z2 + j);
  }
  std::vector<bool> col_nonempty(n, false);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (m(i, j)) col_nonempty[j] = true;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!m(i, j)) continue;
      parents[x2 + j].push_back(z2 + i);
      parents[x2 + j].push_back(e2 + i);
      parents[x1 + j].push_back(z1 + i);
      parents[x1 + j].push_back(e1 + i);
    }
    // The autoregressive branch mixes the whole previous observation into
    // x_{t,j}, but only when the mixing row actually reaches x_j.
    if (obs_edges && col_nonempty[j])
      for (int l = 0; l < n; ++l) parents[x2 + j].push_back(x1 + l);
  }

  for (int v = 0; v < 6 * n; ++v) {
    const auto& ps = parents[v];
    for (std::size_t a = 0; a < ps.size(); ++a) {
      g.connect(ps[a], v);
      for (std::size_t b = a + 1; b < ps.size(); ++b) g.connect(ps[a], ps[b]);
    }
  }

  // Eliminate the noise vertices: neighbours of an eliminated vertex become
  // pairwise adjacent, preserving conditional-dependence structure among the
  // remaining variables.
  std::vector<bool> removed(static_cast<std::size_t>(6) * n, false);
  for (int v = e2; v < 6 * n; ++v) {
    std::vector<int> nb;
    for (int u = 0; u < 6 * n; ++u)
      if (!removed[u] && u != v && g.connected(u, v)) nb.push_back(u);
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b) g.connect(nb[a], nb[b]);
    removed[v] = true;
  }

  IntimateReport rep;
  rep.n = n;
  rep.obs_edges = obs_edges;
  rep.degenerate_single_latent = (n == 1);
  rep.intimate.assign(n, {});
  for (int i = 0; i < n; ++i) {
    const int zi = z2 + i;
    std::vector<int> nb;
    for (int u = 0; u < 4 * n; ++u)
      if (u != zi && g.connected(u, zi)) nb.push_back(u);
    for (int v : nb) {
      bool intimate = true;
      for (int w : nb) {
        if (w == v) continue;
        if (!g.connected(v, w)) {
          intimate = false;
          break;
        }
      }
      if (intimate) rep.intimate[i].push_back(v);
    }
  }
  rep.holds = std::all_of(rep.intimate.begin(), rep.intimate.end(),
                          [](const std::vector<int>& s) { return s.empty(); });
  return rep;
}

std::string intimate_vertex_name(int vertex, int n) {
  if (n < 1 || vertex < 0 || vertex >= 4 * n)
    throw ConfigError("vertex id out of range");
  const int block = vertex / n, idx = vertex % n;
  switch (block) {
    case 0: return "z[t-1][" + std::to_string(idx) + "]";
    case 1: return "x[t-1][" + std::to_string(idx) + "]";
    case 2: return "z[t][" + std::to_string(idx) + "]";
    default: return "x[t][" + std::to_string(idx) + "]";
  }
}

}  // namespace tot
