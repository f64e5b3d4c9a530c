#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "tot/common.hpp"
#include "tot/model.hpp"
#include "tot/rng.hpp"
#include "tot/tensor.hpp"

using namespace tot;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.n = 3;
  cfg.t_in = 4;
  cfg.horizon = 2;
  cfg.enc_width = 16;
  cfg.dec_width = 16;
  cfg.fore_width = 16;
  cfg.eta_width = 16;
  cfg.r_width = 8;
  cfg.seed = 21;
  return cfg;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                     double scale = 1.0) {
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.v) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("encode: shapes, reparameterization identity, determinism") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(4);
  Tensor x_hist = random_matrix(4, 3, rng);
  const std::size_t T = 6;

  Tensor zero_noise = Tensor::zeros({T, 3});
  EncoderOutput out = encode(m, x_hist, zero_noise);
  CHECK(out.mean.rows() == T);
  CHECK(out.mean.cols() == 3);
  CHECK(out.log_var.rows() == T);
  CHECK(out.sample.rows() == T);
  CHECK(out.sample.v == out.mean.v);

  Tensor noise = random_matrix(T, 3, rng);
  EncoderOutput a = encode(m, x_hist, noise);
  EncoderOutput b = encode(m, x_hist, noise);
  CHECK(a.sample.v == b.sample.v);
  for (std::size_t k = 0; k < T * 3; ++k)
    CHECK(a.sample.v[k] ==
          doctest::Approx(a.mean.v[k] + std::exp(0.5 * a.log_var.v[k]) * noise.v[k])
              .epsilon(1e-15));

  Rng s1(77), s2(77);
  CHECK(encode(m, x_hist, s1).sample.v == encode(m, x_hist, s2).sample.v);

  CHECK_THROWS_AS(encode(m, random_matrix(3, 3, rng), zero_noise), DimensionError);
  CHECK_THROWS_AS(encode(m, x_hist, Tensor::zeros({T, 2})), DimensionError);
}

TEST_CASE("decode acts on each step independently") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(9);
  Tensor z = random_matrix(5, 3, rng);
  Tensor base = decode(m, z);
  CHECK(base.rows() == 5);
  CHECK(base.cols() == 3);

  for (std::size_t s = 0; s < 5; ++s) {
    Tensor zp = z;
    zp.at(s, 1) += 0.73;
    Tensor out = decode(m, zp);
    for (std::size_t t = 0; t < 5; ++t) {
      bool row_equal = true;
      for (std::size_t j = 0; j < 3; ++j)
        row_equal = row_equal && out.at(t, j) == base.at(t, j);
      if (t == s)
        CHECK(!row_equal);
      else
        CHECK(row_equal);
    }
  }
  CHECK_THROWS_AS(decode(m, random_matrix(5, 2, rng)), DimensionError);
}

TEST_CASE("identity latent flow: residual is z_curr, partials are one") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  tot_test::force_identity_latent_flows(m);
  Rng rng(13);
  Tensor z_prev = Tensor::zeros({3}), z_curr = Tensor::zeros({3});
  for (double& v : z_prev.v) v = rng.normal();
  for (double& v : z_curr.v) v = rng.normal();
  FlowEval fe = latent_noise(m, z_prev, z_curr);
  CHECK(fe.guard_warnings == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(fe.residual.v[i] == doctest::Approx(z_curr.v[i]).epsilon(1e-14));
    CHECK(fe.diag.v[i] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("identity observation flow: residual is x_curr, partials are one") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  tot_test::force_identity_obs_flows(m);
  Rng rng(14);
  Tensor z = Tensor::zeros({3}), xp = Tensor::zeros({3}), xc = Tensor::zeros({3});
  for (double& v : z.v) v = rng.normal();
  for (double& v : xp.v) v = rng.normal();
  for (double& v : xc.v) v = rng.normal();
  FlowEval fe = obs_noise(m, z, xp, xc);
  CHECK(fe.guard_warnings == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(fe.residual.v[i] == doctest::Approx(xc.v[i]).epsilon(1e-14));
    CHECK(fe.diag.v[i] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("latent flow partials match finite differences; cross terms vanish") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(15);
  Tensor z_prev = Tensor::zeros({3}), z_curr = Tensor::zeros({3});
  for (double& v : z_prev.v) v = rng.normal();
  for (double& v : z_curr.v) v = rng.normal();
  FlowEval fe = latent_noise(m, z_prev, z_curr);

  const double eps = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor zp = z_curr, zm = z_curr;
    zp.v[j] += eps;
    zm.v[j] -= eps;
    FlowEval up = latent_noise(m, z_prev, zp);
    FlowEval dn = latent_noise(m, z_prev, zm);
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = (up.residual.v[i] - dn.residual.v[i]) / (2 * eps);
      if (i == j)
        CHECK(std::fabs(fd - fe.diag.v[i]) <= 1e-6);
      else
        // Per-dimension networks never see the other current coordinates.
        CHECK(up.residual.v[i] == dn.residual.v[i]);
    }
  }
}

TEST_CASE("observation flow partials match finite differences; cross terms vanish") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(16);
  Tensor z = Tensor::zeros({3}), xp = Tensor::zeros({3}), xc = Tensor::zeros({3});
  for (double& v : z.v) v = rng.normal();
  for (double& v : xp.v) v = rng.normal();
  for (double& v : xc.v) v = rng.normal();
  FlowEval fe = obs_noise(m, z, xp, xc);

  const double eps = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor up_x = xc, dn_x = xc;
    up_x.v[j] += eps;
    dn_x.v[j] -= eps;
    FlowEval up = obs_noise(m, z, xp, up_x);
    FlowEval dn = obs_noise(m, z, xp, dn_x);
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = (up.residual.v[i] - dn.residual.v[i]) / (2 * eps);
      if (i == j)
        CHECK(std::fabs(fd - fe.diag.v[i]) <= 1e-6);
      else
        CHECK(up.residual.v[i] == dn.residual.v[i]);
    }
  }
}

TEST_CASE("guard warnings fire when a flow head is identically zero") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  // Zero the first latent head outright: residual and partial both vanish.
  for (const char* name : {"rz0.W0", "rz0.b0", "rz0.W1", "rz0.b1"})
    for (double& v : m.params.get(name).v) v = 0.0;
  FlowEval fe = latent_noise(m, Tensor::vec({0.1, 0.2, 0.3}),
                             Tensor::vec({0.4, 0.5, 0.6}));
  CHECK(fe.guard_warnings == 1);
  CHECK(fe.diag.v[0] == 0.0);
}

TEST_CASE("forecast consumes both the latent path and the history context") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(18);
  Tensor z_future = random_matrix(2, 3, rng);
  Tensor x_hist = random_matrix(4, 3, rng);
  Tensor base = forecast(m, z_future, x_hist);
  CHECK(base.rows() == 2);
  CHECK(base.cols() == 3);

  Tensor x2 = x_hist;
  x2.at(0, 0) += 1.0;
  Tensor shifted_ctx = forecast(m, z_future, x2);
  CHECK(shifted_ctx.v != base.v);

  Tensor z2 = z_future;
  z2.at(1, 2) += 1.0;
  Tensor shifted_z = forecast(m, z2, x_hist);
  // Per-step input: row 0 untouched, row 1 moved.
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(shifted_z.at(0, j) == base.at(0, j));
  }
  bool row1_moved = false;
  for (std::size_t j = 0; j < 3; ++j)
    row1_moved = row1_moved || shifted_z.at(1, j) != base.at(1, j);
  CHECK(row1_moved);

  CHECK_THROWS_AS(forecast(m, z_future, random_matrix(2, 3, rng)), DimensionError);
}

TEST_CASE("linear decoder realizes its matrix and exposes it as the Jacobian") {
  ModelConfig cfg = small_config();
  cfg.dec_width = 2 * cfg.n;
  TotModel m = build_model(cfg);
  Rng rng(19);
  Tensor M = random_matrix(3, 3, rng);
  tot_test::force_linear_decoder(m, M);

  Tensor z = Tensor::vec({0.7, -1.3, 2.1});
  Tensor decoded = decode(m, Tensor::from({1, 3}, z.v));
  for (std::size_t i = 0; i < 3; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < 3; ++j) want += M.at(i, j) * z.v[j];
    CHECK(decoded.at(0, i) == doctest::Approx(want).epsilon(1e-12));
  }
  Tensor jac = decoder_jacobian(m, z);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(jac.at(i, j) == doctest::Approx(M.at(i, j)).epsilon(1e-12));

  // The same matrix emerges at a different evaluation point.
  Tensor jac2 = decoder_jacobian(m, Tensor::vec({-0.4, 0.9, -2.2}));
  for (std::size_t k = 0; k < 9; ++k)
    CHECK(jac2.v[k] == doctest::Approx(M.v[k]).epsilon(1e-12));
}

TEST_CASE("decoder Jacobian agrees with finite differences") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Rng rng(20);
  Tensor z = Tensor::zeros({3});
  for (double& v : z.v) v = rng.normal();
  Tensor jac = decoder_jacobian(m, z);

  const double eps = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor zp = z, zm = z;
    zp.v[j] += eps;
    zm.v[j] -= eps;
    Tensor up = decode(m, Tensor::from({1, 3}, zp.v));
    Tensor dn = decode(m, Tensor::from({1, 3}, zm.v));
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = (up.at(0, i) - dn.at(0, i)) / (2 * eps);
      CHECK(std::fabs(fd - jac.at(i, j)) <= 1e-6);
    }
  }
}

TEST_CASE("a freshly initialized dense decoder has a fully dense Jacobian") {
  ModelConfig cfg = small_config();
  TotModel m = build_model(cfg);
  Tensor jac = decoder_jacobian(m, Tensor::vec({0.3, -0.6, 1.1}));
  for (double v : jac.v) CHECK(std::fabs(v) > 0.0);
}

TEST_CASE("model construction is deterministic and validates its config") {
  ModelConfig cfg = small_config();
  TotModel a = build_model(cfg);
  TotModel b = build_model(cfg);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params.item(i).first == b.params.item(i).first);
    CHECK(a.params.item(i).second.v == b.params.item(i).second.v);
  }
  cfg.seed = 22;
  TotModel c = build_model(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (a.params.item(i).second.v != c.params.item(i).second.v) any_diff = true;
  CHECK(any_diff);

  ModelConfig bad = small_config();
  bad.horizon = 0;
  CHECK_THROWS_AS(build_model(bad), ConfigError);
  bad = small_config();
  bad.slope = 0.0;
  CHECK_THROWS_AS(build_model(bad), ConfigError);
}
