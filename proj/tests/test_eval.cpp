// Identifiability metrics, assignment solver, baseline forecasters, and the
// exact discrete risk lab checked against an independent enumeration oracle.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include "test_util.hpp"
#include "tot/baselines.hpp"
#include "tot/chain.hpp"
#include "tot/common.hpp"
#include "tot/eval.hpp"
#include "tot/hungarian.hpp"
#include "tot/risk_lab.hpp"
#include "tot/synthgen.hpp"
#include "tot/train.hpp"

using namespace tot;

namespace {

Tensor gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.v) v = rng.normal();
  return t;
}

// ---- Independent risk oracle ----------------------------------------------
// Stationary law by plain power iteration on the joint (z, x) transition,
// then every risk from one explicit p(z, x, zhat, x') table. Shares no code
// path with the library beyond the chain definition itself.

std::vector<double> oracle_stationary(const DiscreteLatentChain& c) {
  const int k = c.k, m = c.m, S = k * m;
  std::vector<double> trans(static_cast<std::size_t>(S) * S, 0.0);
  for (int z = 0; z < k; ++z)
    for (int x = 0; x < m; ++x)
      for (int zn = 0; zn < k; ++zn)
        for (int xn = 0; xn < m; ++xn)
          trans[static_cast<std::size_t>((z * m + x) * S + zn * m + xn)] =
              c.p_z.at(static_cast<std::size_t>(z), static_cast<std::size_t>(zn)) *
              c.p_x[static_cast<std::size_t>(zn)].at(static_cast<std::size_t>(x),
                                                     static_cast<std::size_t>(xn));
  std::vector<double> pi(static_cast<std::size_t>(S), 1.0 / S);
  std::vector<double> nxt(static_cast<std::size_t>(S));
  for (int it = 0; it < 4000; ++it) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (int s = 0; s < S; ++s)
      for (int t = 0; t < S; ++t)
        nxt[static_cast<std::size_t>(t)] +=
            pi[static_cast<std::size_t>(s)] *
            trans[static_cast<std::size_t>(s * S + t)];
    const double sum = std::accumulate(nxt.begin(), nxt.end(), 0.0);
    for (double& v : nxt) v /= sum;
    pi.swap(nxt);
  }
  return pi;
}

struct OracleRisk {
  double r_z = 0.0, r_o = 0.0, r_zhat = 0.0, cross = 0.0;
};

OracleRisk oracle_risk(const DiscreteLatentChain& c, const Tensor& q) {
  const int k = c.k, m = c.m;
  const std::vector<double> pi = oracle_stationary(c);

  auto idx = [k, m](int z, int x, int h, int xn) {
    return static_cast<std::size_t>(((z * m + x) * k + h) * m + xn);
  };
  std::vector<double> joint(static_cast<std::size_t>(k) * m * k * m, 0.0);
  for (int z = 0; z < k; ++z)
    for (int x = 0; x < m; ++x) {
      const double base = pi[static_cast<std::size_t>(z * m + x)];
      for (int h = 0; h < k; ++h) {
        const double wq =
            base * q.at(static_cast<std::size_t>(z), static_cast<std::size_t>(h));
        if (wq == 0.0) continue;
        for (int zn = 0; zn < k; ++zn)
          for (int xn = 0; xn < m; ++xn)
            joint[idx(z, x, h, xn)] +=
                wq *
                c.p_z.at(static_cast<std::size_t>(z), static_cast<std::size_t>(zn)) *
                c.p_x[static_cast<std::size_t>(zn)].at(
                    static_cast<std::size_t>(x), static_cast<std::size_t>(xn));
      }
    }

  // Sum over groups of P(group) * Var(x' | group) for any grouping of the
  // conditioning triple.
  auto risk_by = [&](auto group, int n_groups) {
    std::vector<double> w(static_cast<std::size_t>(n_groups), 0.0);
    std::vector<double> m1(static_cast<std::size_t>(n_groups), 0.0);
    std::vector<double> m2(static_cast<std::size_t>(n_groups), 0.0);
    for (int z = 0; z < k; ++z)
      for (int x = 0; x < m; ++x)
        for (int h = 0; h < k; ++h)
          for (int xn = 0; xn < m; ++xn) {
            const double p = joint[idx(z, x, h, xn)];
            if (p == 0.0) continue;
            const std::size_t g = static_cast<std::size_t>(group(z, x, h));
            w[g] += p;
            m1[g] += p * xn;
            m2[g] += p * static_cast<double>(xn) * xn;
          }
    double r = 0.0;
    for (std::size_t g = 0; g < w.size(); ++g) {
      if (w[g] <= 0.0) continue;
      const double mu = m1[g] / w[g];
      r += w[g] * (m2[g] / w[g] - mu * mu);
    }
    return r;
  };

  OracleRisk out;
  out.r_z = risk_by([m](int z, int x, int) { return z * m + x; }, k * m);
  out.r_o = risk_by([](int, int x, int) { return x; }, m);
  out.r_zhat = risk_by([m](int, int x, int h) { return h * m + x; }, k * m);

  // Law-of-total-variance cross term: spread of the per-z predictive means
  // within each observed state.
  for (int x = 0; x < m; ++x) {
    double px = 0.0;
    std::vector<double> wz(static_cast<std::size_t>(k), 0.0);
    std::vector<double> ez(static_cast<std::size_t>(k), 0.0);
    for (int z = 0; z < k; ++z) {
      for (int h = 0; h < k; ++h)
        for (int xn = 0; xn < m; ++xn) {
          const double p = joint[idx(z, x, h, xn)];
          wz[static_cast<std::size_t>(z)] += p;
          ez[static_cast<std::size_t>(z)] += p * xn;
        }
      px += wz[static_cast<std::size_t>(z)];
    }
    if (px <= 0.0) continue;
    double mean = 0.0, sq = 0.0;
    for (int z = 0; z < k; ++z) {
      if (wz[static_cast<std::size_t>(z)] <= 0.0) continue;
      const double mu = ez[static_cast<std::size_t>(z)] / wz[static_cast<std::size_t>(z)];
      const double pw = wz[static_cast<std::size_t>(z)] / px;
      mean += pw * mu;
      sq += pw * mu * mu;
    }
    out.cross += px * (sq - mean * mean);
  }
  return out;
}

bool px_slices_differ(const DiscreteLatentChain& c) {
  for (std::size_t a = 1; a < c.p_x.size(); ++a)
    for (std::size_t i = 0; i < c.p_x[a].v.size(); ++i)
      if (std::abs(c.p_x[a].v[i] - c.p_x[0].v[i]) > 1e-12) return true;
  return false;
}

std::filesystem::path tmp_path(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "tot_eval_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("mcc is 1 on self and under permutation, sign and affine maps") {
  Tensor z = gaussian_matrix(200, 4, 101);

  MccReport self = mcc(z, z);
  CHECK(self.score == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) CHECK(self.assignment[i] == i);

  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  const std::vector<double> scale = {1.7, -0.4, 2.2, -3.0};
  const std::vector<double> shift = {0.3, -1.0, 4.0, 0.0};
  Tensor est = Tensor::zeros({200, 4});
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t j = 0; j < 4; ++j)
      est.at(r, j) = scale[j] * z.at(r, perm[j]) + shift[j];
  MccReport rep = mcc(z, est);
  CHECK(rep.score == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(rep.assignment[perm[j]] == static_cast<int>(j));

  // Monotone linear maps of the other argument leave the score unchanged too.
  Tensor z2 = z;
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t j = 0; j < 4; ++j) z2.at(r, j) = 3.0 * z.at(r, j) - 5.0;
  MccReport rep2 = mcc(z2, est);
  CHECK(rep2.score == doctest::Approx(rep.score).epsilon(1e-12));
}

TEST_CASE("mcc null distribution stays low and degenerate columns score zero") {
  Tensor z = gaussian_matrix(10000, 5, 7);
  Tensor noise = gaussian_matrix(10000, 5, 8);
  MccReport rep = mcc(z, noise);
  CHECK(rep.score <= 0.1);
  CHECK(rep.score >= 0.0);
  for (double v : rep.abs_corr.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
  std::vector<bool> seen(5, false);
  for (int a : rep.assignment) {
    REQUIRE(a >= 0);
    REQUIRE(a < 5);
    CHECK(!seen[static_cast<std::size_t>(a)]);
    seen[static_cast<std::size_t>(a)] = true;
  }

  Tensor flat = Tensor::full({10000, 5}, 2.5);
  MccReport zero = mcc(z, flat);
  CHECK(zero.score == 0.0);
}

TEST_CASE("mcc input validation") {
  Tensor a = gaussian_matrix(10, 3, 1);
  Tensor b = gaussian_matrix(10, 4, 2);
  CHECK_THROWS_AS(mcc(a, b), DimensionError);
  Tensor one = gaussian_matrix(1, 3, 3);
  CHECK_THROWS_AS(mcc(one, one), DimensionError);
}

TEST_CASE("assignment solver matches exhaustive search") {
  // Hand instance with a unique optimum.
  Tensor cost = Tensor::from({3, 3}, {4, 1, 3, 2, 0, 5, 3, 2, 2});
  std::vector<int> a = min_cost_assignment(cost);
  CHECK(a == std::vector<int>{1, 0, 2});

  Rng rng(4242);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      Tensor score = Tensor::zeros({static_cast<std::size_t>(n),
                                    static_cast<std::size_t>(n)});
      for (double& v : score.v) v = rng.uniform01();

      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best_max = -1e300, best_min = 1e300;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          s += score.at(static_cast<std::size_t>(i),
                        static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]));
        best_max = std::max(best_max, s);
        best_min = std::min(best_min, s);
      } while (std::next_permutation(perm.begin(), perm.end()));

      std::vector<int> mx = max_sum_assignment(score);
      double got_max = 0.0;
      for (int i = 0; i < n; ++i)
        got_max += score.at(static_cast<std::size_t>(i),
                            static_cast<std::size_t>(mx[static_cast<std::size_t>(i)]));
      CHECK(got_max == doctest::Approx(best_max).epsilon(1e-12));

      std::vector<int> mn = min_cost_assignment(score);
      double got_min = 0.0;
      for (int i = 0; i < n; ++i)
        got_min += score.at(static_cast<std::size_t>(i),
                            static_cast<std::size_t>(mn[static_cast<std::size_t>(i)]));
      CHECK(got_min == doctest::Approx(best_min).epsilon(1e-12));
    }
  }
}

TEST_CASE("forecast metrics hand values") {
  Tensor a = Tensor::vec({1.0, 2.0, 3.0});
  ForecastMetrics same = forecast_metrics(a, a);
  CHECK(same.mse == 0.0);
  CHECK(same.mae == 0.0);

  Tensor b = Tensor::vec({3.0, 4.0, 5.0});
  ForecastMetrics off = forecast_metrics(a, b);
  CHECK(off.mse == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(off.mae == doctest::Approx(2.0).epsilon(1e-15));

  ForecastMetrics hand =
      forecast_metrics(Tensor::vec({0.0, 0.0}), Tensor::vec({1.0, 3.0}));
  CHECK(hand.mse == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(hand.mae == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(forecast_metrics(a, Tensor::vec({1.0})), DimensionError);
}

TEST_CASE("encode_series is causal and validates its interval") {
  GenConfig g;
  g.n = 3;
  g.total_steps = 80;
  g.validation_size = 16;
  g.seed = 5;
  Dataset ds = generate_dataset(g);
  ModelConfig mc;
  mc.n = 3;
  mc.t_in = 6;
  mc.horizon = 2;
  mc.enc_width = 16;
  mc.dec_width = 16;
  mc.fore_width = 16;
  mc.eta_width = 16;
  mc.r_width = 8;
  mc.seed = 13;
  TotModel m = build_model(mc);

  Tensor full = encode_series(m, ds, 5, 40);
  REQUIRE(full.shape == std::vector<std::size_t>{35, 3});

  // Rows depend only on the trailing t_in observations: chopping the future
  // off the stream reproduces them bitwise.
  Dataset cut = ds;
  cut.config.total_steps = 40;
  cut.x = Tensor::zeros({40, 3});
  cut.z = Tensor::zeros({40, 3});
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t j = 0; j < 3; ++j) {
      cut.x.at(r, j) = ds.x.at(r, j);
      cut.z.at(r, j) = ds.z.at(r, j);
    }
  cut.train_end = 30;
  cut.val_begin = 30;
  cut.val_end = 40;
  Tensor part = encode_series(m, cut, 5, 40);
  for (std::size_t i = 0; i < full.v.size(); ++i) CHECK(full.v[i] == part.v[i]);

  CHECK_THROWS_AS(encode_series(m, ds, 4, 40), ConfigError);
  CHECK_THROWS_AS(encode_series(m, ds, 20, 20), ConfigError);
  CHECK_THROWS_AS(encode_series(m, ds, 5, 81), ConfigError);
}

TEST_CASE("validation forecast metrics match a direct reimplementation") {
  GenConfig g;
  g.n = 3;
  g.total_steps = 120;
  g.validation_size = 24;
  g.seed = 6;
  Dataset ds = generate_dataset(g);
  ModelConfig mc;
  mc.n = 3;
  mc.t_in = 6;
  mc.horizon = 2;
  mc.enc_width = 16;
  mc.dec_width = 16;
  mc.fore_width = 16;
  mc.eta_width = 16;
  mc.r_width = 8;
  mc.seed = 14;
  TotModel m = build_model(mc);

  ForecastMetrics got = validation_forecast_metrics(m, ds);
  CHECK(validation_forecast_mse(m, ds) == got.mse);

  const std::size_t t_in = 6, H = 2, n = 3, T = 8;
  double mse = 0.0, mae = 0.0;
  std::int64_t count = 0;
  for (std::int64_t s = ds.val_begin; s + static_cast<std::int64_t>(T) <= ds.val_end; ++s) {
    Tensor hist = Tensor::zeros({t_in, n});
    for (std::size_t r = 0; r < t_in; ++r)
      for (std::size_t j = 0; j < n; ++j)
        hist.at(r, j) = ds.x.at(static_cast<std::size_t>(s) + r, j);
    EncoderOutput enc = encode(m, hist, Tensor::zeros({T, n}));
    Tensor zf = Tensor::zeros({H, n});
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < n; ++j)
        zf.at(h, j) = enc.sample.at(t_in + h, j);
    Tensor pred = forecast(m, zf, hist);
    double se = 0.0, ae = 0.0;
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t j = 0; j < n; ++j) {
        const double d =
            pred.at(h, j) - ds.x.at(static_cast<std::size_t>(s) + t_in + h, j);
        se += d * d;
        ae += std::abs(d);
      }
    mse += se / static_cast<double>(H * n);
    mae += ae / static_cast<double>(H * n);
    ++count;
  }
  CHECK(got.mse == doctest::Approx(mse / count).epsilon(1e-12));
  CHECK(got.mae == doctest::Approx(mae / count).epsilon(1e-12));

  Dataset narrow = ds;
  narrow.val_begin = ds.val_end - 4;  // shorter than one window
  CHECK_THROWS_AS(validation_forecast_metrics(m, narrow), ConfigError);
}

TEST_CASE("support recovery scores a planted linear decoder exactly") {
  GenConfig g;
  g.n = 3;
  g.total_steps = 140;
  g.validation_size = 30;
  g.seed = 9;
  Dataset ds = generate_dataset(g);
  ModelConfig mc;
  mc.n = 3;
  mc.t_in = 6;
  mc.horizon = 2;
  mc.enc_width = 16;
  mc.dec_width = 16;
  mc.fore_width = 16;
  mc.eta_width = 16;
  mc.r_width = 8;
  mc.seed = 15;

  // True support: latent 0 -> obs {0, 1}, latent 1 -> obs 1, latent 2 -> obs 2.
  ds.gen.mixing.has_mask = true;
  ds.gen.mixing.mask = {1, 1, 0, 0, 1, 0, 0, 0, 1};

  auto planted_model = [&](double weak01, double spurious20) {
    TotModel m = build_model(mc);
    Tensor M = Tensor::zeros({3, 3});  // decoder matrix: rows obs, cols latent
    M.at(0, 0) = 1.0;
    M.at(1, 0) = weak01;
    M.at(1, 1) = 1.0;
    M.at(2, 2) = 1.0;
    M.at(2, 0) = spurious20;
    tot_test::force_linear_decoder(m, M);
    // Ground-truth latents equal to the encoder output make the alignment
    // step the identity, so the planted support is scored as-is.
    Tensor est = encode_series(m, ds, ds.val_begin, ds.val_end);
    for (std::size_t r = 0; r < est.rows(); ++r)
      for (std::size_t j = 0; j < 3; ++j)
        ds.z.at(static_cast<std::size_t>(ds.val_begin) + r, j) = est.at(r, j);
    return m;
  };

  SUBCASE("exact support gives perfect scores") {
    TotModel m = planted_model(1.0, 0.0);
    SupportRecovery rec = jacobian_support_f1(m, ds, 5, 0.1);
    CHECK(rec.precision == 1.0);
    CHECK(rec.recall == 1.0);
    CHECK(rec.f1 == 1.0);
    CHECK(rec.mean_abs_jac.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rec.mean_abs_jac.at(1, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("a sub-threshold true edge costs recall") {
    TotModel m = planted_model(0.05, 0.0);
    SupportRecovery rec = jacobian_support_f1(m, ds, 5, 0.1);
    CHECK(rec.precision == 1.0);
    CHECK(rec.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rec.f1 == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
    // A looser threshold recovers it.
    SupportRecovery loose = jacobian_support_f1(m, ds, 5, 0.01);
    CHECK(loose.f1 == 1.0);
  }

  SUBCASE("a spurious edge costs precision") {
    TotModel m = planted_model(1.0, 0.5);
    SupportRecovery rec = jacobian_support_f1(m, ds, 5, 0.1);
    CHECK(rec.recall == 1.0);
    CHECK(rec.precision == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rec.f1 == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  }

  SUBCASE("parameter validation") {
    TotModel m = planted_model(1.0, 0.0);
    CHECK_THROWS_AS(jacobian_support_f1(m, ds, 0, 0.1), ConfigError);
    CHECK_THROWS_AS(jacobian_support_f1(m, ds, 5, 0.0), ConfigError);
    CHECK_THROWS_AS(jacobian_support_f1(m, ds, 5, 1.0), ConfigError);
  }
}

TEST_CASE("chain validation and random chains") {
  Rng rng(31);
  DiscreteLatentChain c = random_chain(3, 4, rng);
  CHECK_NOTHROW(c.validate());
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(c.p_z.at(r, j) >= 0.05);
      s += c.p_z.at(r, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (const Tensor& slice : c.p_x)
    for (double v : slice.v) CHECK(v >= 0.05);

  Rng rng2(31);
  DiscreteLatentChain c2 = random_chain(3, 4, rng2);
  for (std::size_t i = 0; i < c.p_z.v.size(); ++i)
    CHECK(c.p_z.v[i] == c2.p_z.v[i]);

  DiscreteLatentChain bad = c;
  bad.p_z.at(0, 0) += 0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.p_x.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.k = kMaxChainStates + 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  Rng rng3(1);
  CHECK_THROWS_AS(random_chain(6, 6, rng3, 0.2), ConfigError);
}

TEST_CASE("chain json round trip and error paths") {
  Rng rng(77);
  DiscreteLatentChain c = random_chain(4, 3, rng);
  const std::string text = chain_to_json(c);
  DiscreteLatentChain back = chain_from_json(text);
  CHECK(back.k == c.k);
  CHECK(back.m == c.m);
  for (std::size_t i = 0; i < c.p_z.v.size(); ++i)
    CHECK(back.p_z.v[i] == c.p_z.v[i]);
  for (std::size_t z = 0; z < 4; ++z)
    for (std::size_t i = 0; i < c.p_x[z].v.size(); ++i)
      CHECK(back.p_x[z].v[i] == c.p_x[z].v[i]);

  const auto path = tmp_path("chain.json");
  save_chain_file(c, path.string());
  DiscreteLatentChain loaded = load_chain_file(path.string());
  CHECK(loaded.k == c.k);
  for (std::size_t i = 0; i < c.p_z.v.size(); ++i)
    CHECK(loaded.p_z.v[i] == c.p_z.v[i]);

  CHECK_THROWS_AS(chain_from_json("not json at all"), IoError);
  CHECK_THROWS_AS(chain_from_json("{\"k\": 2, \"m\": 2}"), IoError);
  // Structurally valid json that fails stochasticity.
  CHECK_THROWS_WITH_AS(
      chain_from_json("{\"k\":1,\"m\":2,\"p_z\":[[1.0]],"
                      "\"p_x\":[[[0.5,0.2],[0.5,0.5]]]}"),
      doctest::Contains("invalid"), IoError);
  CHECK_THROWS_AS(load_chain_file(tmp_path("missing.json").string()), IoError);
}

TEST_CASE("stationary law is a fixed point and matches power iteration") {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(5));
    const int m = 1 + static_cast<int>(rng.below(5));
    DiscreteLatentChain c = random_chain(k, m, rng);
    Tensor pi = stationary_joint(c);
    REQUIRE(pi.size() == static_cast<std::size_t>(k * m));
    double sum = 0.0;
    for (double v : pi.v) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> ref = oracle_stationary(c);
    for (std::size_t s = 0; s < pi.size(); ++s)
      CHECK(pi.v[s] == doctest::Approx(ref[s]).epsilon(1e-10));
  }
}

TEST_CASE("channel matrices have the documented structure") {
  ChannelSpec id;
  Tensor qi = channel_matrix(id, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      CHECK(qi.at(a, b) == (a == b ? 1.0 : 0.0));

  ChannelSpec bij;
  bij.kind = ChannelKind::bijection;
  bij.perm = {2, 0, 1};
  Tensor qb = channel_matrix(bij, 3);
  CHECK(qb.at(0, 2) == 1.0);
  CHECK(qb.at(1, 0) == 1.0);
  CHECK(qb.at(2, 1) == 1.0);

  ChannelSpec drawn;
  drawn.kind = ChannelKind::bijection;
  drawn.seed = 12;
  Tensor qd = channel_matrix(drawn, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK((qd.at(r, c) == 0.0 || qd.at(r, c) == 1.0));
      s += qd.at(r, c);
    }
    CHECK(s == 1.0);
  }
  Tensor qd2 = channel_matrix(drawn, 4);
  for (std::size_t i = 0; i < qd.v.size(); ++i) CHECK(qd.v[i] == qd2.v[i]);

  ChannelSpec noisy;
  noisy.kind = ChannelKind::noisy;
  noisy.p_flip = 0.3;
  Tensor qn = channel_matrix(noisy, 4);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      CHECK(qn.at(a, b) ==
            doctest::Approx(a == b ? 0.7 + 0.3 / 4 : 0.3 / 4).epsilon(1e-15));

  noisy.p_flip = 0.0;
  Tensor q0 = channel_matrix(noisy, 3);
  for (std::size_t i = 0; i < q0.v.size(); ++i) CHECK(q0.v[i] == qi.v[i]);

  ChannelSpec ind;
  ind.kind = ChannelKind::independent;
  Tensor qu = channel_matrix(ind, 5);
  for (double v : qu.v) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  noisy.p_flip = 1.0;
  Tensor q1 = channel_matrix(noisy, 5);
  for (std::size_t i = 0; i < q1.v.size(); ++i)
    CHECK(q1.v[i] == doctest::Approx(qu.v[i]).epsilon(1e-15));

  ChannelSpec bad;
  bad.kind = ChannelKind::bijection;
  bad.perm = {0, 0, 1};
  CHECK_THROWS_AS(channel_matrix(bad, 3), ConfigError);
  bad.perm = {0, 1};
  CHECK_THROWS_AS(channel_matrix(bad, 3), ConfigError);
  bad.perm = {0, 1, 3};
  CHECK_THROWS_AS(channel_matrix(bad, 3), ConfigError);
  ChannelSpec badp;
  badp.kind = ChannelKind::noisy;
  badp.p_flip = -0.1;
  CHECK_THROWS_AS(channel_matrix(badp, 3), ConfigError);
  badp.p_flip = 1.1;
  CHECK_THROWS_AS(channel_matrix(badp, 3), ConfigError);

  CHECK(channel_kind_from_string("identity") == ChannelKind::identity);
  CHECK(channel_kind_from_string("noisy") == ChannelKind::noisy);
  CHECK(channel_kind_to_string(ChannelKind::bijection) == "bijection");
  CHECK(channel_kind_to_string(ChannelKind::independent) == "independent");
  CHECK_THROWS_AS(channel_kind_from_string("garbled"), ConfigError);
}

TEST_CASE("risk lab hand examples") {
  SUBCASE("single latent state carries no information") {
    DiscreteLatentChain c;
    c.k = 1;
    c.m = 2;
    c.p_z = Tensor::from({1, 1}, {1.0});
    c.p_x = {Tensor::from({2, 2}, {2.0 / 3.0, 1.0 / 3.0, 0.5, 0.5})};
    // Stationary x: pi0 = 3/5. Var(x'|x=0) = 2/9, Var(x'|x=1) = 1/4, so every
    // risk equals 3/5 * 2/9 + 2/5 * 1/4 = 7/30.
    for (ChannelKind kind : {ChannelKind::identity, ChannelKind::bijection,
                             ChannelKind::noisy, ChannelKind::independent}) {
      ChannelSpec ch;
      ch.kind = kind;
      RiskReport rep = risk_lab(c, ch);
      CHECK(rep.r_z == doctest::Approx(7.0 / 30.0).epsilon(1e-14));
      CHECK(rep.r_o == doctest::Approx(7.0 / 30.0).epsilon(1e-14));
      CHECK(rep.r_zhat == doctest::Approx(7.0 / 30.0).epsilon(1e-14));
      CHECK(std::abs(rep.cross_term) <= 1e-14);
      CHECK(rep.decomposition_residual <= 1e-14);
    }
  }

  SUBCASE("symmetric two-state chain with memoryless emissions") {
    DiscreteLatentChain c;
    c.k = 2;
    c.m = 2;
    c.p_z = Tensor::from({2, 2}, {0.9, 0.1, 0.1, 0.9});
    c.p_x = {Tensor::from({2, 2}, {0.8, 0.2, 0.8, 0.2}),
             Tensor::from({2, 2}, {0.2, 0.8, 0.2, 0.8})};
    // p(x'=1 | z) is 0.26 or 0.74 regardless of x, giving Var = 0.1924 in
    // both latent states; posterior p(z=x | x) = 0.8 mixes them to 0.356 and
    // Var = 0.229264, with cross term 0.036864 closing the decomposition.
    ChannelSpec id;
    RiskReport rep = risk_lab(c, id);
    CHECK(rep.r_z == doctest::Approx(0.1924).epsilon(1e-12));
    CHECK(rep.r_o == doctest::Approx(0.229264).epsilon(1e-12));
    CHECK(rep.cross_term == doctest::Approx(0.036864).epsilon(1e-12));
    CHECK(rep.r_zhat == doctest::Approx(rep.r_z).epsilon(1e-13));
    CHECK(rep.decomposition_residual <= 1e-14);

    ChannelSpec bij;
    bij.kind = ChannelKind::bijection;
    bij.perm = {1, 0};
    RiskReport relabeled = risk_lab(c, bij);
    CHECK(std::abs(relabeled.r_zhat - rep.r_z) <= 1e-12);

    ChannelSpec ind;
    ind.kind = ChannelKind::independent;
    RiskReport scrambled = risk_lab(c, ind);
    CHECK(std::abs(scrambled.r_zhat - rep.r_o) <= 1e-12);

    ChannelSpec noisy;
    noisy.kind = ChannelKind::noisy;
    noisy.p_flip = 0.2;
    RiskReport degraded = risk_lab(c, noisy);
    CHECK(degraded.r_zhat > rep.r_z + 1e-6);
    CHECK(degraded.r_zhat < rep.r_o - 1e-6);
  }
}

TEST_CASE("risk lab agrees with the enumeration oracle on random chains") {
  Rng rng(20240816);
  int strict_checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(6));
    const int m = 1 + static_cast<int>(rng.below(6));
    DiscreteLatentChain c = random_chain(k, m, rng);
    CAPTURE(trial);
    CAPTURE(k);
    CAPTURE(m);

    ChannelSpec noisy;
    noisy.kind = ChannelKind::noisy;
    noisy.p_flip = 0.2;
    ChannelSpec bij;
    bij.kind = ChannelKind::bijection;
    bij.seed = static_cast<std::uint64_t>(trial);
    ChannelSpec ind;
    ind.kind = ChannelKind::independent;
    ChannelSpec id;

    for (const ChannelSpec& ch : {id, bij, noisy, ind}) {
      RiskReport rep = risk_lab(c, ch);
      OracleRisk want = oracle_risk(c, channel_matrix(ch, k));
      CHECK(std::abs(rep.r_z - want.r_z) <= 1e-12);
      CHECK(std::abs(rep.r_o - want.r_o) <= 1e-12);
      CHECK(std::abs(rep.r_zhat - want.r_zhat) <= 1e-12);
      CHECK(std::abs(rep.cross_term - want.cross) <= 1e-12);
      CHECK(rep.decomposition_residual <= 1e-12);
      CHECK(rep.r_z >= 0.0);
      CHECK(rep.r_o >= rep.r_z - 1e-12);
      // Degrading the representation can only move risk toward the ceiling.
      CHECK(rep.r_zhat >= rep.r_z - 1e-12);
      CHECK(rep.r_zhat <= rep.r_o + 1e-12);
    }

    RiskReport base = risk_lab(c, id);
    CHECK(std::abs(base.r_zhat - base.r_z) <= 1e-13);
    RiskReport blind = risk_lab(c, ind);
    CHECK(std::abs(blind.r_zhat - base.r_o) <= 1e-12);
    if (px_slices_differ(c)) {
      CHECK(base.r_o > base.r_z + 1e-10);
      ++strict_checked;
    }
  }
  CHECK(strict_checked >= 30);  // the strict-inequality branch actually ran
}

TEST_CASE("reducible chains are rejected") {
  DiscreteLatentChain frozen_z;
  frozen_z.k = 2;
  frozen_z.m = 2;
  frozen_z.p_z = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  frozen_z.p_x = {Tensor::from({2, 2}, {0.7, 0.3, 0.4, 0.6}),
                  Tensor::from({2, 2}, {0.2, 0.8, 0.9, 0.1})};
  ChannelSpec id;
  CHECK_THROWS_WITH_AS(risk_lab(frozen_z, id), doctest::Contains("not unique"),
                       NumericError);

  DiscreteLatentChain frozen_x;
  frozen_x.k = 2;
  frozen_x.m = 3;
  frozen_x.p_z = Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5});
  Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  frozen_x.p_x = {eye, eye};
  CHECK_THROWS_AS(risk_lab(frozen_x, id), NumericError);
}

TEST_CASE("direct forecaster regimes order as the theory predicts") {
  GenConfig g;
  g.n = 3;
  g.lag = 1;
  g.obs_edges = true;
  g.total_steps = 1600;
  g.validation_size = 300;
  g.seed = 91;
  g.noise_std_o = 0.3;
  Dataset ds = generate_dataset(g);

  DirectForecastConfig cfg;
  cfg.t_in = 6;
  cfg.horizon = 2;
  cfg.width = 32;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.learning_rate = 2e-3;
  cfg.seed = 33;

  DirectForecaster base = train_direct_forecaster(ds, ForecastRegime::x_only, cfg);
  DirectForecaster oracle = train_direct_forecaster(ds, ForecastRegime::x_true_z, cfg);
  DirectForecaster control = train_direct_forecaster(ds, ForecastRegime::x_noise_z, cfg);

  const double mse_base = direct_forecaster_mse(base, ds);
  const double mse_oracle = direct_forecaster_mse(oracle, ds);
  const double mse_control = direct_forecaster_mse(control, ds);
  CAPTURE(mse_base);
  CAPTURE(mse_oracle);
  CAPTURE(mse_control);

  // True future latents are genuinely informative; pure noise in the same
  // slots collapses back to the observation-only error.
  CHECK(mse_oracle < mse_base);
  CHECK(std::abs(mse_control - mse_base) <= 0.05 * mse_base);

  DirectForecastConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(train_direct_forecaster(ds, ForecastRegime::x_only, bad),
                  ConfigError);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train_direct_forecaster(ds, ForecastRegime::x_only, bad),
                  ConfigError);

  // Determinism of the training path.
  DirectForecaster again = train_direct_forecaster(ds, ForecastRegime::x_only, cfg);
  CHECK(direct_forecaster_mse(again, ds) == mse_base);
}

TEST_CASE("baseline suite report is internally consistent") {
  GenConfig g;
  g.n = 3;
  g.lag = 1;
  g.obs_edges = true;
  g.total_steps = 800;
  g.validation_size = 160;
  g.seed = 92;
  g.noise_std_o = 0.3;
  Dataset ds = generate_dataset(g);

  ModelConfig mc;
  mc.n = 3;
  mc.t_in = 6;
  mc.horizon = 2;
  mc.enc_width = 24;
  mc.dec_width = 24;
  mc.fore_width = 24;
  mc.eta_width = 24;
  mc.r_width = 12;
  mc.seed = 44;
  TotModel model = build_model(mc);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.learning_rate = 2e-3;
  tc.seed = 45;
  tc.windows_per_epoch = 64;
  train_offline(ds, model, tc);

  DirectForecastConfig cfg;
  cfg.width = 32;
  cfg.epochs = 4;
  cfg.batch_size = 64;
  cfg.learning_rate = 2e-3;
  cfg.seed = 46;
  cfg.t_in = 99;    // overridden by the model config
  cfg.horizon = 99;

  BaselineReport rep = baseline_suite(ds, model, cfg);
  CHECK(std::isfinite(rep.mse_x_only));
  CHECK(std::isfinite(rep.mse_oracle));
  CHECK(rep.mse_x_only > 0.0);
  CHECK(rep.mse_oracle > 0.0);
  CHECK(rep.mse_oracle < rep.mse_x_only);
  CHECK(rep.mse_tot == validation_forecast_mse(model, ds));
  const double denom = rep.mse_x_only - rep.mse_oracle;
  CHECK(rep.gap_fraction ==
        doctest::Approx((rep.mse_x_only - rep.mse_tot) / denom).epsilon(1e-12));
}
