#pragma once

#include <vector>

#include "tot/chain.hpp"

namespace tot {

// Joint law of four consecutive observations under the stationary chain,
// p[x_{t-2}][x_{t-1}][x_t][x_{t+1}]. Kept in extended precision: the slice
// identities behind build_AB degrade as eps * cond(slice), and the extra
// mantissa bits are what keep well-conditioned probes at the 1e-12 contract.
struct JointTensor4 {
  int m = 0;
  std::vector<long double> p;

  long double& at(int a, int b, int c, int d) {
    return p[static_cast<std::size_t>(((a * m + b) * m + c) * m + d)];
  }
  long double at(int a, int b, int c, int d) const {
    return p[static_cast<std::size_t>(((a * m + b) * m + c) * m + d)];
  }
};

JointTensor4 build_joint4(const DiscreteLatentChain& chain);

// Ground truth targets of the spectral construction at observation x_t:
// column j of the kernel is p(x_{t+1} | x_t, z_t = j); the ratio vector holds
// the eigenvalues the probe (xb_t, xb_m1) should produce.
Tensor true_pred_kernel(const DiscreteLatentChain& chain, int x_t);
std::vector<double> true_eig_ratios(const DiscreteLatentChain& chain, int x_t,
                                    int xb_t, int x_m1, int xb_m1);

// Slice of the 4-joint at fixed (x_t, x_{t-1}): rows x_{t+1}, cols x_{t-2}.
Tensor joint_slice(const JointTensor4& j4, int x_t, int x_m1);

struct AbResult {
  Tensor ab;              // the similarity-transformed diagonal-ratio matrix
  double max_slice_cond;  // worst conditioning among the two inverted slices
};

// AB = S(x_t,x_m1) S(xb_t,x_m1)^{-1} S(xb_t,xb_m1) S(x_t,xb_m1)^{-1}.
// Requires m == k; throws NumericError when an inverted slice has condition
// number above 1e10.
AbResult build_AB(const JointTensor4& j4, int x_t, int xb_t, int x_m1, int xb_m1);

struct SpectralResult {
  Tensor kernels;                   // [m, k] recovered kernel columns
  std::vector<double> eigenvalues;  // aligned with kernel columns
  double eigen_gap = 0.0;           // smallest pairwise eigenvalue distance
  double max_imag = 0.0;            // largest imaginary magnitude encountered
  // Alignment and errors versus the supplied ground truth (when given):
  // column j of `kernels` corresponds to latent state alignment[j].
  std::vector<int> alignment;
  double max_kernel_err = 0.0;
  double max_eigenvalue_err = 0.0;
};

// Eigendecomposition of AB with eigenvector columns normalized to unit sum.
// Throws NumericError on a complex spectrum (imaginary part above 1e-10), an
// eigen-gap below 1e-8, or a degenerate eigenvector scaling.
SpectralResult spectral_identify(const Tensor& ab, const Tensor* truth_kernel,
                                 const std::vector<double>* truth_ratios);

struct ProbeDiag {
  int xb_t = 0, xb_m1 = 0;
  double max_slice_cond = 0.0;
  double min_ratio_gap = 0.0;
  double max_imag = 0.0;
  bool usable = false;
};

struct AssumptionReport {
  double min_prob = 0.0;          // smallest transition entry anywhere (A1)
  double max_kernel_cond = 0.0;   // worst conditioning of the true kernels (A2)
  bool positivity = false;        // A1
  bool kernel_rank = false;       // A2
  bool ratios_distinct = false;   // A3 at some probe
  bool ratios_vacuous = false;    // k == 1
  std::vector<ProbeDiag> probes;
};

// Diagnostics for one (x_t, x_{t-1}) anchor over every candidate probe.
AssumptionReport check_assumptions(const DiscreteLatentChain& chain, int x_t,
                                   int x_m1);

struct AnchorResult {
  int x_t = 0, x_m1 = 0;
  int xb_t = 0, xb_m1 = 0;  // probe that succeeded
  SpectralResult spectral;
};

struct OperatorLabResult {
  std::vector<AnchorResult> anchors;  // one per x_t value
  double max_kernel_err = 0.0;
  double max_eigenvalue_err = 0.0;
};

// Full identification sweep: for every x_t, search probes in lexicographic
// order and recover the kernel, comparing against the exact targets.
OperatorLabResult run_operator_lab(const DiscreteLatentChain& chain);

}  // namespace tot
