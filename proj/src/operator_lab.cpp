#include "tot/operator_lab.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tot/common.hpp"
#include "tot/hungarian.hpp"

namespace tot {
namespace {

constexpr double kCondLimit = 1e10;
constexpr double kImagTol = 1e-10;
constexpr double kGapTol = 1e-8;

using MatLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = t.at(i, j);
  return m;
}

// Extended-precision view of a 4-joint slice, same layout as joint_slice.
MatLd slice_ld(const JointTensor4& j4, int x_t, int x_m1) {
  MatLd s(j4.m, j4.m);
  for (int xn = 0; xn < j4.m; ++xn)
    for (int x2 = 0; x2 < j4.m; ++x2) s(xn, x2) = j4.at(x2, x_m1, x_t, xn);
  return s;
}

double cond_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

double cond_number_ld(const MatLd& m) {
  Eigen::JacobiSVD<MatLd> svd(m);
  const auto& s = svd.singularValues();
  const long double smin = s(s.size() - 1);
  if (!(smin > 0.0L)) return std::numeric_limits<double>::infinity();
  return static_cast<double>(s(0) / smin);
}

void check_anchor(const DiscreteLatentChain& chain, int x_t, int x_m1) {
  if (x_t < 0 || x_t >= chain.m || x_m1 < 0 || x_m1 >= chain.m)
    throw ConfigError("anchor observation out of range");
}

}  // namespace

JointTensor4 build_joint4(const DiscreteLatentChain& chain) {
  chain.validate();
  const int k = chain.k, m = chain.m;
  const Tensor pi = stationary_joint(chain);

  // Forward sweep over the latent path, keeping observations explicit.
  // a1[z1][x2][x1] = p(z_{t-1}=z1, x_{t-2}=x2, x_{t-1}=x1).
  std::vector<long double> a1(static_cast<std::size_t>(k * m * m), 0.0L);
  for (int z2 = 0; z2 < k; ++z2)
    for (int x2 = 0; x2 < m; ++x2)
      for (int z1 = 0; z1 < k; ++z1)
        for (int x1 = 0; x1 < m; ++x1)
          a1[static_cast<std::size_t>((z1 * m + x2) * m + x1)] +=
              static_cast<long double>(pi.v[static_cast<std::size_t>(z2 * m + x2)]) *
              chain.p_z.at(static_cast<std::size_t>(z2), static_cast<std::size_t>(z1)) *
              chain.p_x[static_cast<std::size_t>(z1)].at(static_cast<std::size_t>(x2),
                                                         static_cast<std::size_t>(x1));

  // a2[z0][x2][x1][x0] = p(z_t=z0, x_{t-2}, x_{t-1}, x_t).
  std::vector<long double> a2(static_cast<std::size_t>(k * m * m * m), 0.0L);
  for (int z1 = 0; z1 < k; ++z1)
    for (int x2 = 0; x2 < m; ++x2)
      for (int x1 = 0; x1 < m; ++x1) {
        const long double base = a1[static_cast<std::size_t>((z1 * m + x2) * m + x1)];
        if (base == 0.0L) continue;
        for (int z0 = 0; z0 < k; ++z0)
          for (int x0 = 0; x0 < m; ++x0)
            a2[static_cast<std::size_t>(((z0 * m + x2) * m + x1) * m + x0)] +=
                base *
                chain.p_z.at(static_cast<std::size_t>(z1), static_cast<std::size_t>(z0)) *
                chain.p_x[static_cast<std::size_t>(z0)].at(static_cast<std::size_t>(x1),
                                                           static_cast<std::size_t>(x0));
      }

  JointTensor4 j4;
  j4.m = m;
  j4.p.assign(static_cast<std::size_t>(m) * m * m * m, 0.0L);
  for (int z0 = 0; z0 < k; ++z0)
    for (int x2 = 0; x2 < m; ++x2)
      for (int x1 = 0; x1 < m; ++x1)
        for (int x0 = 0; x0 < m; ++x0) {
          const long double base =
              a2[static_cast<std::size_t>(((z0 * m + x2) * m + x1) * m + x0)];
          if (base == 0.0L) continue;
          for (int zn = 0; zn < k; ++zn)
            for (int xn = 0; xn < m; ++xn)
              j4.at(x2, x1, x0, xn) +=
                  base *
                  chain.p_z.at(static_cast<std::size_t>(z0), static_cast<std::size_t>(zn)) *
                  chain.p_x[static_cast<std::size_t>(zn)].at(static_cast<std::size_t>(x0),
                                                             static_cast<std::size_t>(xn));
        }
  return j4;
}

Tensor true_pred_kernel(const DiscreteLatentChain& chain, int x_t) {
  chain.validate();
  check_anchor(chain, x_t, 0);
  Tensor l = Tensor::zeros({static_cast<std::size_t>(chain.m),
                            static_cast<std::size_t>(chain.k)});
  for (int z = 0; z < chain.k; ++z)
    for (int xn = 0; xn < chain.m; ++xn) {
      double acc = 0.0;
      for (int zn = 0; zn < chain.k; ++zn)
        acc += chain.p_z.at(static_cast<std::size_t>(z), static_cast<std::size_t>(zn)) *
               chain.p_x[static_cast<std::size_t>(zn)].at(static_cast<std::size_t>(x_t),
                                                          static_cast<std::size_t>(xn));
      l.at(static_cast<std::size_t>(xn), static_cast<std::size_t>(z)) = acc;
    }
  return l;
}

std::vector<double> true_eig_ratios(const DiscreteLatentChain& chain, int x_t,
                                    int xb_t, int x_m1, int xb_m1) {
  chain.validate();
  check_anchor(chain, x_t, x_m1);
  check_anchor(chain, xb_t, xb_m1);
  std::vector<double> r(static_cast<std::size_t>(chain.k));
  for (int j = 0; j < chain.k; ++j) {
    const Tensor& px = chain.p_x[static_cast<std::size_t>(j)];
    const double num = px.at(static_cast<std::size_t>(x_m1), static_cast<std::size_t>(x_t)) *
                       px.at(static_cast<std::size_t>(xb_m1), static_cast<std::size_t>(xb_t));
    const double den = px.at(static_cast<std::size_t>(x_m1), static_cast<std::size_t>(xb_t)) *
                       px.at(static_cast<std::size_t>(xb_m1), static_cast<std::size_t>(x_t));
    if (den == 0.0) throw NumericError("eigenvalue ratio undefined: zero transition probability");
    r[static_cast<std::size_t>(j)] = num / den;
  }
  return r;
}

Tensor joint_slice(const JointTensor4& j4, int x_t, int x_m1) {
  if (j4.m < 1) throw ConfigError("empty joint tensor");
  if (x_t < 0 || x_t >= j4.m || x_m1 < 0 || x_m1 >= j4.m)
    throw ConfigError("slice coordinates out of range");
  Tensor s = Tensor::zeros({static_cast<std::size_t>(j4.m),
                            static_cast<std::size_t>(j4.m)});
  for (int xn = 0; xn < j4.m; ++xn)
    for (int x2 = 0; x2 < j4.m; ++x2)
      s.at(static_cast<std::size_t>(xn), static_cast<std::size_t>(x2)) =
          static_cast<double>(j4.at(x2, x_m1, x_t, xn));
  return s;
}

AbResult build_AB(const JointTensor4& j4, int x_t, int xb_t, int x_m1, int xb_m1) {
  if (x_t == xb_t || x_m1 == xb_m1)
    throw ConfigError("probe must differ from the anchor in both coordinates");
  const MatLd s1 = slice_ld(j4, x_t, x_m1);
  const MatLd s2 = slice_ld(j4, xb_t, x_m1);
  const MatLd s3 = slice_ld(j4, xb_t, xb_m1);
  const MatLd s4 = slice_ld(j4, x_t, xb_m1);

  AbResult res;
  res.max_slice_cond = std::max(cond_number_ld(s2), cond_number_ld(s4));
  if (!(res.max_slice_cond < kCondLimit))
    throw NumericError("slice inversion ill-conditioned (condition " +
                       std::to_string(res.max_slice_cond) + ") at probe (" +
                       std::to_string(xb_t) + "," + std::to_string(xb_m1) + ")");
  // A = S1 S2^{-1}, B = S3 S4^{-1}, via transposed solves.
  const MatLd a = s2.transpose().partialPivLu().solve(s1.transpose()).transpose();
  const MatLd b = s4.transpose().partialPivLu().solve(s3.transpose()).transpose();
  const MatLd ab = a * b;
  res.ab = Tensor::zeros({static_cast<std::size_t>(j4.m),
                          static_cast<std::size_t>(j4.m)});
  for (int i = 0; i < j4.m; ++i)
    for (int j = 0; j < j4.m; ++j)
      res.ab.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          static_cast<double>(ab(i, j));
  return res;
}

SpectralResult spectral_identify(const Tensor& ab, const Tensor* truth_kernel,
                                 const std::vector<double>* truth_ratios) {
  if (ab.rows() != ab.cols() || ab.rows() == 0)
    throw DimensionError("spectral_identify needs a square matrix");
  const int m = static_cast<int>(ab.rows());
  Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(ab));
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed to converge");

  SpectralResult out;
  double scale = 1.0;
  for (int i = 0; i < m; ++i)
    scale = std::max(scale, std::abs(es.eigenvalues()(i)));
  for (int i = 0; i < m; ++i)
    out.max_imag = std::max(out.max_imag, std::abs(es.eigenvalues()(i).imag()));
  for (int i = 0; i < m; ++i)
    for (int r = 0; r < m; ++r)
      out.max_imag = std::max(out.max_imag, std::abs(es.eigenvectors()(r, i).imag()));
  if (out.max_imag > kImagTol * scale)
    throw NumericError("complex spectrum (max imaginary part " +
                       std::to_string(out.max_imag) + ")");

  out.eigenvalues.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    out.eigenvalues[static_cast<std::size_t>(i)] = es.eigenvalues()(i).real();

  out.eigen_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      out.eigen_gap = std::min(out.eigen_gap,
                               std::abs(out.eigenvalues[static_cast<std::size_t>(i)] -
                                        out.eigenvalues[static_cast<std::size_t>(j)]));
  if (m > 1 && out.eigen_gap < kGapTol)
    throw NumericError("eigenvalues not distinct (gap " +
                       std::to_string(out.eigen_gap) +
                       "), latent states not separable at this probe");

  out.kernels = Tensor::zeros({static_cast<std::size_t>(m), static_cast<std::size_t>(m)});
  for (int j = 0; j < m; ++j) {
    double sum = 0.0, norm1 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double v = es.eigenvectors()(i, j).real();
      sum += v;
      norm1 += std::abs(v);
    }
    if (std::abs(sum) < 1e-9 * norm1)
      throw NumericError("eigenvector " + std::to_string(j) +
                         " has near-zero mass, cannot normalize to a distribution");
    for (int i = 0; i < m; ++i)
      out.kernels.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          es.eigenvectors()(i, j).real() / sum;
  }

  if (truth_kernel != nullptr && truth_ratios != nullptr) {
    if (truth_kernel->rows() != static_cast<std::size_t>(m) ||
        truth_kernel->cols() != static_cast<std::size_t>(m) ||
        truth_ratios->size() != static_cast<std::size_t>(m))
      throw DimensionError("ground truth dimensions do not match the matrix");
    // Pair recovered columns with latent states by eigenvalue proximity.
    Tensor cost = Tensor::zeros({static_cast<std::size_t>(m), static_cast<std::size_t>(m)});
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        cost.at(static_cast<std::size_t>(j), static_cast<std::size_t>(a)) =
            std::abs(out.eigenvalues[static_cast<std::size_t>(j)] -
                     (*truth_ratios)[static_cast<std::size_t>(a)]);
    out.alignment = min_cost_assignment(cost);
    for (int j = 0; j < m; ++j) {
      const int a = out.alignment[static_cast<std::size_t>(j)];
      out.max_eigenvalue_err =
          std::max(out.max_eigenvalue_err,
                   std::abs(out.eigenvalues[static_cast<std::size_t>(j)] -
                            (*truth_ratios)[static_cast<std::size_t>(a)]));
      for (int i = 0; i < m; ++i)
        out.max_kernel_err = std::max(
            out.max_kernel_err,
            std::abs(out.kernels.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) -
                     truth_kernel->at(static_cast<std::size_t>(i), static_cast<std::size_t>(a))));
    }
  }
  return out;
}

AssumptionReport check_assumptions(const DiscreteLatentChain& chain, int x_t,
                                   int x_m1) {
  chain.validate();
  check_anchor(chain, x_t, x_m1);
  AssumptionReport rep;

  rep.min_prob = 1.0;
  for (double v : chain.p_z.v) rep.min_prob = std::min(rep.min_prob, v);
  for (const Tensor& px : chain.p_x)
    for (double v : px.v) rep.min_prob = std::min(rep.min_prob, v);
  rep.positivity = rep.min_prob > 0.0;

  double worst = 0.0;
  for (int x = 0; x < chain.m; ++x)
    worst = std::max(worst, cond_number(to_eigen(true_pred_kernel(chain, x))));
  rep.max_kernel_cond = worst;
  rep.kernel_rank = worst < kCondLimit;

  rep.ratios_vacuous = chain.k == 1;
  const bool square = chain.m == chain.k;
  JointTensor4 j4;
  if (square) j4 = build_joint4(chain);
  for (int xb_t = 0; xb_t < chain.m; ++xb_t) {
    if (xb_t == x_t) continue;
    for (int xb_m1 = 0; xb_m1 < chain.m; ++xb_m1) {
      if (xb_m1 == x_m1) continue;
      ProbeDiag d;
      d.xb_t = xb_t;
      d.xb_m1 = xb_m1;
      std::vector<double> ratios = true_eig_ratios(chain, x_t, xb_t, x_m1, xb_m1);
      d.min_ratio_gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ratios.size(); ++i)
        for (std::size_t j = i + 1; j < ratios.size(); ++j)
          d.min_ratio_gap = std::min(d.min_ratio_gap, std::abs(ratios[i] - ratios[j]));
      if (chain.k == 1) d.min_ratio_gap = std::numeric_limits<double>::infinity();
      d.usable = rep.positivity && (chain.k == 1 || d.min_ratio_gap >= kGapTol);
      if (square) {
        try {
          AbResult ab = build_AB(j4, x_t, xb_t, x_m1, xb_m1);
          d.max_slice_cond = ab.max_slice_cond;
          SpectralResult sr = spectral_identify(ab.ab, nullptr, nullptr);
          d.max_imag = sr.max_imag;
        } catch (const NumericError&) {
          d.usable = false;
          d.max_slice_cond = std::numeric_limits<double>::infinity();
        }
      }
      if (d.usable && chain.k > 1) rep.ratios_distinct = true;
      rep.probes.push_back(d);
    }
  }
  if (rep.ratios_vacuous) rep.ratios_distinct = true;
  return rep;
}

OperatorLabResult run_operator_lab(const DiscreteLatentChain& chain) {
  chain.validate();
  if (chain.m != chain.k)
    throw ConfigError("spectral identification needs m == k (got m=" +
                      std::to_string(chain.m) + ", k=" + std::to_string(chain.k) + ")");
  const int m = chain.m;
  const JointTensor4 j4 = build_joint4(chain);

  OperatorLabResult res;
  for (int x_t = 0; x_t < m; ++x_t) {
    const Tensor truth = true_pred_kernel(chain, x_t);
    // Rank candidate probes by slice conditioning before the spectral step:
    // the recovered operators inherit eps * cond, so the best-conditioned
    // probe, not the first acceptable one, carries the accuracy contract.
    struct Cand {
      double cond;
      int x_m1, xb_t, xb_m1;
      AbResult ab;
    };
    std::vector<Cand> cands;
    std::string last_err = "no candidate probes";
    for (int x_m1 = 0; x_m1 < m; ++x_m1)
      for (int xb_t = 0; xb_t < m; ++xb_t) {
        if (xb_t == x_t) continue;
        for (int xb_m1 = 0; xb_m1 < m; ++xb_m1) {
          if (xb_m1 == x_m1) continue;
          try {
            AbResult ab = build_AB(j4, x_t, xb_t, x_m1, xb_m1);
            cands.push_back(Cand{ab.max_slice_cond, x_m1, xb_t, xb_m1,
                                 std::move(ab)});
          } catch (const NumericError& e) {
            last_err = e.what();
          }
        }
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.cond != b.cond) return a.cond < b.cond;
      if (a.x_m1 != b.x_m1) return a.x_m1 < b.x_m1;
      if (a.xb_t != b.xb_t) return a.xb_t < b.xb_t;
      return a.xb_m1 < b.xb_m1;
    });
    bool done = false;
    for (Cand& c : cands) {
      try {
        std::vector<double> ratios =
            true_eig_ratios(chain, x_t, c.xb_t, c.x_m1, c.xb_m1);
        SpectralResult sr = spectral_identify(c.ab.ab, &truth, &ratios);
        AnchorResult ar;
        ar.x_t = x_t;
        ar.x_m1 = c.x_m1;
        ar.xb_t = c.xb_t;
        ar.xb_m1 = c.xb_m1;
        ar.spectral = std::move(sr);
        res.max_kernel_err =
            std::max(res.max_kernel_err, ar.spectral.max_kernel_err);
        res.max_eigenvalue_err =
            std::max(res.max_eigenvalue_err, ar.spectral.max_eigenvalue_err);
        res.anchors.push_back(std::move(ar));
        done = true;
        break;
      } catch (const NumericError& e) {
        last_err = e.what();
      }
    }
    if (!done)
      throw NumericError("x_t=" + std::to_string(x_t) +
                         ": no probe separates the latent states (last: " +
                         last_err + ")");
  }
  return res;
}

}  // namespace tot
