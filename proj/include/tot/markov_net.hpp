#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tot {

// Structural test for the identifiability condition on the augmented state
// u_t = (z_{t-1}, x_{t-1}, z_t, x_t): every current-step latent must have an
// empty intimate-neighbour set in the moralized two-slice network.
//
// The network is built from the generative mechanisms whose head lies inside
// the window (z_t <- z_{t-1}, z_t <- z_{<i,t}, x_t <- z_t via the mixing mask,
// x_t <- x_{t-1} when obs_edges, x_{t-1} <- z_{t-1} via the mask). Shared
// observation-noise terms enter as explicit vertices and are eliminated after
// moralization, which ties together every pair of observations they feed.
// Ancestors older than t-1 are outside the window and contribute no edges.
struct IntimateReport {
  int n = 0;
  bool obs_edges = false;
  bool holds = false;
  // Per current-step latent i: vertices adjacent to every other neighbour of
  // z_{t,i}. Non-empty anywhere means the assumption fails.
  std::vector<std::vector<int>> intimate;
  // n == 1 makes the condition hold trivially; flagged so callers can warn.
  bool degenerate_single_latent = false;
};

// mask is row-major n x n, mask[i*n+j] != 0 iff z_i feeds x_j. A fully dense
// mask is the unmasked mixing case.
IntimateReport check_sparse_mixing_assumption(const std::vector<std::uint8_t>& mask,
                                              int n, bool obs_edges);

// Human-readable vertex name for the ids stored in IntimateReport::intimate.
std::string intimate_vertex_name(int vertex, int n);

}  // namespace tot
