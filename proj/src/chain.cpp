#include "tot/chain.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "json.hpp"
#include "tot/common.hpp"
#include "tot/io.hpp"

namespace tot {
namespace {

using ordered_json = nlohmann::ordered_json;

void check_stochastic(const Tensor& t, int dim, const std::string& what) {
  if (t.rows() != static_cast<std::size_t>(dim) ||
      t.cols() != static_cast<std::size_t>(dim))
    throw ConfigError(what + " must be " + std::to_string(dim) + "x" +
                      std::to_string(dim) + ", got " + t.shape_str());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double v = t.at(r, c);
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError(what + " row " + std::to_string(r) +
                          " has a negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ConfigError(what + " row " + std::to_string(r) +
                        " sums to " + std::to_string(s) + ", expected 1");
  }
}

Tensor stochastic_row_matrix(int dim, Rng& rng, double min_prob) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(dim),
                            static_cast<std::size_t>(dim)});
  for (int r = 0; r < dim; ++r) {
    double sum = 0.0;
    std::vector<double> u(static_cast<std::size_t>(dim));
    for (double& x : u) {
      x = rng.uniform01();
      sum += x;
    }
    const double spread = 1.0 - dim * min_prob;
    for (int c = 0; c < dim; ++c)
      t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
          min_prob + spread * u[static_cast<std::size_t>(c)] / sum;
  }
  return t;
}

Tensor tensor_from_rows(const ordered_json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty())
    throw IoError(what + " must be a non-empty array of rows");
  const std::size_t r = rows.size();
  if (!rows[0].is_array()) throw IoError(what + " rows must be arrays");
  const std::size_t c = rows[0].size();
  Tensor t = Tensor::zeros({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    if (!rows[i].is_array() || rows[i].size() != c)
      throw IoError(what + " rows are ragged");
    for (std::size_t j = 0; j < c; ++j) {
      if (!rows[i][j].is_number()) throw IoError(what + " entries must be numbers");
      t.at(i, j) = rows[i][j].get<double>();
    }
  }
  return t;
}

ordered_json rows_to_json(const Tensor& t) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void DiscreteLatentChain::validate() const {
  if (k < 1 || m < 1) throw ConfigError("chain needs k >= 1 and m >= 1");
  if (k > kMaxChainStates || m > kMaxChainStates)
    throw ConfigError("chain is limited to " + std::to_string(kMaxChainStates) +
                      " states per variable");
  check_stochastic(p_z, k, "p_z");
  if (p_x.size() != static_cast<std::size_t>(k))
    throw ConfigError("p_x must hold one matrix per latent state");
  for (int z = 0; z < k; ++z)
    check_stochastic(p_x[static_cast<std::size_t>(z)], m,
                     "p_x[" + std::to_string(z) + "]");
}

DiscreteLatentChain random_chain(int k, int m, Rng& rng, double min_prob) {
  if (min_prob < 0.0 || min_prob * std::max(k, m) >= 1.0)
    throw ConfigError("min_prob too large for the requested state counts");
  DiscreteLatentChain c;
  c.k = k;
  c.m = m;
  c.p_z = stochastic_row_matrix(k, rng, min_prob);
  for (int z = 0; z < k; ++z) c.p_x.push_back(stochastic_row_matrix(m, rng, min_prob));
  c.validate();
  return c;
}

std::string chain_to_json(const DiscreteLatentChain& c) {
  c.validate();
  ordered_json j;
  j["k"] = c.k;
  j["m"] = c.m;
  j["p_z"] = rows_to_json(c.p_z);
  ordered_json px = ordered_json::array();
  for (const Tensor& t : c.p_x) px.push_back(rows_to_json(t));
  j["p_x"] = std::move(px);
  return j.dump(2) + "\n";
}

DiscreteLatentChain chain_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("chain json parse error: ") + e.what());
  }
  for (const auto& key : {"k", "m", "p_z", "p_x"})
    if (!j.contains(key)) throw IoError(std::string("chain json missing field ") + key);
  DiscreteLatentChain c;
  if (!j["k"].is_number_integer() || !j["m"].is_number_integer())
    throw IoError("chain json: k and m must be integers");
  c.k = j["k"].get<int>();
  c.m = j["m"].get<int>();
  c.p_z = tensor_from_rows(j["p_z"], "p_z");
  if (!j["p_x"].is_array()) throw IoError("p_x must be an array of matrices");
  for (const auto& slice : j["p_x"]) c.p_x.push_back(tensor_from_rows(slice, "p_x"));
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("chain json invalid: ") + e.what());
  }
  return c;
}

DiscreteLatentChain load_chain_file(const std::string& path) {
  return chain_from_json(read_text_file(path));
}

void save_chain_file(const DiscreteLatentChain& c, const std::string& path) {
  write_text_file(path, chain_to_json(c));
}

Tensor stationary_joint(const DiscreteLatentChain& c) {
  c.validate();
  const int S = c.k * c.m;
  Eigen::MatrixXd Q(S, S);
  for (int z = 0; z < c.k; ++z)
    for (int x = 0; x < c.m; ++x)
      for (int zn = 0; zn < c.k; ++zn)
        for (int xn = 0; xn < c.m; ++xn)
          Q(z * c.m + x, zn * c.m + xn) =
              c.p_z.at(static_cast<std::size_t>(z), static_cast<std::size_t>(zn)) *
              c.p_x[static_cast<std::size_t>(zn)].at(static_cast<std::size_t>(x),
                                                     static_cast<std::size_t>(xn));

  Eigen::MatrixXd A = Q.transpose() - Eigen::MatrixXd::Identity(S, S);
  // Unique stationary distribution iff rank(Q^T - I) == S - 1.
  Eigen::FullPivLU<Eigen::MatrixXd> rank_lu(A);
  rank_lu.setThreshold(1e-10);
  if (rank_lu.rank() < S - 1)
    throw NumericError("stationary distribution is not unique (reducible chain)");

  Eigen::MatrixXd M = A;
  for (int s = 0; s < S; ++s) M(S - 1, s) = 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  b(S - 1) = 1.0;
  Eigen::VectorXd pi = M.fullPivLu().solve(b);
  Tensor out = Tensor::zeros({static_cast<std::size_t>(S)});
  double sum = 0.0;
  for (int s = 0; s < S; ++s) {
    if (pi(s) < -1e-9)
      throw NumericError("stationary solve produced a negative probability");
    out.v[static_cast<std::size_t>(s)] = std::max(pi(s), 0.0);
    sum += out.v[static_cast<std::size_t>(s)];
  }
  for (double& v : out.v) v /= sum;
  return out;
}

}  // namespace tot
