#include "tot/synthgen.hpp"

#include <cmath>
#include <cstring>
#include <deque>
#include <string>

#include "tot/common.hpp"
#include "tot/io.hpp"
#include "tot/markov_net.hpp"

namespace tot {
namespace {

constexpr double kSlope = 0.2;
constexpr char kMagic[4] = {'T', 'O', 'T', 'D'};
constexpr std::uint32_t kVersion = 1;

double leaky(double v) { return v >= 0.0 ? v : kSlope * v; }

double uniform_half(Rng& rng) { return rng.uniform01() - 0.5; }

Tensor draw_matrix(Rng& rng, int rows, int cols) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(rows),
                            static_cast<std::size_t>(cols)});
  for (double& v : t.v) v = uniform_half(rng);
  return t;
}

// With every observation required to carry signal (no empty mask column) and
// every latent required to mix somewhere, the empty-intimate-set condition
// admits exactly the permutation masks: any shared column makes the sharing
// latents intimate, and n pairwise column-disjoint nonempty rows over n
// columns must be singletons. Verified exhaustively for n <= 4 against the
// checker, so the draw is constructive rather than rejection-sampled.
std::vector<std::uint8_t> draw_sparse_mask(const GenConfig& cfg) {
  Rng rng(sub_seed(cfg.seed, "mask"));
  const int n = cfg.n;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    mask[static_cast<std::size_t>(i) * n + perm[static_cast<std::size_t>(i)]] = 1;
  if (!check_sparse_mixing_assumption(mask, n, cfg.obs_edges).holds)
    throw NumericError("sparse mixing mask fails the structural assumption");
  return mask;
}

}  // namespace

void GenConfig::validate() const {
  if (n < 1) throw ConfigError("gen.n must be >= 1");
  if (lag < 1) throw ConfigError("gen.lag must be >= 1");
  if (total_steps < 1) throw ConfigError("gen.total_steps must be >= 1");
  if (validation_size < 0) throw ConfigError("gen.validation_size must be >= 0");
  if (validation_size >= total_steps)
    throw ConfigError("gen.validation_size must be smaller than gen.total_steps");
  if (noise_std_z < 0.0 || noise_std_o < 0.0)
    throw ConfigError("gen noise scales must be >= 0");
}

GeneratorParams draw_generator_params(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(sub_seed(cfg.seed, "weights"));
  GeneratorParams p;
  p.latent.W.reserve(static_cast<std::size_t>(cfg.lag));
  for (int l = 0; l < cfg.lag; ++l) p.latent.W.push_back(draw_matrix(rng, cfg.n, cfg.n));
  p.latent.V = draw_matrix(rng, cfg.n, cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = i; j < cfg.n; ++j) p.latent.V.at(i, j) = 0.0;
  p.mixing.W_x = draw_matrix(rng, cfg.n, cfg.n);
  p.mixing.W_m = draw_matrix(rng, cfg.n, cfg.n);
  if (cfg.sparse_mixing) {
    p.mixing.mask = draw_sparse_mask(cfg);
    p.mixing.has_mask = true;
    for (int i = 0; i < cfg.n; ++i)
      for (int j = 0; j < cfg.n; ++j)
        if (!p.mixing.mask[static_cast<std::size_t>(i) * cfg.n + j])
          p.mixing.W_m.at(i, j) = 0.0;
  }
  return p;
}

Tensor gen_latent_step_with_noise(const LatentProcessParams& params,
                                  const std::vector<Tensor>& z_hist,
                                  const Tensor& eps_mult, const Tensor& eps_add) {
  if (params.W.empty()) throw ConfigError("latent process needs at least one lag matrix");
  const std::size_t n = params.W[0].rows();
  if (z_hist.size() != params.W.size())
    throw DimensionError("z_hist must supply one row per lag");
  for (const Tensor& zh : z_hist)
    if (zh.size() != n) throw DimensionError("z_hist row width mismatch");
  if (eps_mult.size() != n || eps_add.size() != n)
    throw DimensionError("noise width mismatch");

  Tensor z = Tensor::zeros({n});
  const std::size_t lag = params.W.size();
  for (std::size_t i = 0; i < n; ++i) {
    double det = 0.0;
    for (std::size_t l = 0; l < lag; ++l) {
      // z_hist is oldest first; W[0] couples to lag 1 (the newest row).
      const Tensor& zp = z_hist[lag - 1 - l];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += params.W[l].at(i, j) * zp.v[j];
      det += leaky(acc);
    }
    for (std::size_t j = 0; j < i; ++j) det += params.V.at(i, j) * z.v[j];
    z.v[i] = det * eps_mult.v[i] + eps_add.v[i];
  }
  z.validate();
  return z;
}

Tensor gen_latent_step(const LatentProcessParams& params,
                       const std::vector<Tensor>& z_hist, Rng& rng,
                       double noise_std_z) {
  if (params.W.empty()) throw ConfigError("latent process needs at least one lag matrix");
  const std::size_t n = params.W[0].rows();
  Tensor eps_mult = Tensor::zeros({n}), eps_add = Tensor::zeros({n});
  for (double& v : eps_mult.v) v = noise_std_z * rng.normal();
  for (double& v : eps_add.v) v = noise_std_z * rng.normal();
  return gen_latent_step_with_noise(params, z_hist, eps_mult, eps_add);
}

Tensor gen_obs_step_with_noise(const MixingParams& params, const Tensor& x_prev,
                               const Tensor& z_t, const Tensor& eps_o,
                               bool obs_edges) {
  const std::size_t n = params.W_m.rows();
  if (x_prev.size() != n || z_t.size() != n || eps_o.size() != n)
    throw DimensionError("observation step width mismatch");

  Tensor mid = Tensor::zeros({n});
  for (std::size_t j = 0; j < n; ++j) {
    double pre = z_t.v[j] + eps_o.v[j];
    if (obs_edges) {
      double ar = 0.0;
      for (std::size_t l = 0; l < n; ++l) ar += x_prev.v[l] * params.W_x.at(l, j);
      pre += 0.2 * leaky(ar);
    }
    mid.v[j] = leaky(pre);
  }
  Tensor x = Tensor::zeros({n});
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < n; ++l) acc += mid.v[l] * params.W_m.at(l, j);
    x.v[j] = leaky(acc);
  }
  x.validate();
  return x;
}

Tensor gen_obs_step(const MixingParams& params, const Tensor& x_prev,
                    const Tensor& z_t, Rng& rng, bool obs_edges,
                    double noise_std_o) {
  const std::size_t n = params.W_m.rows();
  Tensor eps = Tensor::zeros({n});
  for (double& v : eps.v) v = noise_std_o * rng.normal();
  return gen_obs_step_with_noise(params, x_prev, z_t, eps, obs_edges);
}

namespace {

Dataset simulate(const GenConfig& cfg, const GeneratorParams& first,
                 const GeneratorParams* second, std::int64_t switch_step) {
  const std::size_t n = static_cast<std::size_t>(cfg.n);
  const std::int64_t total = cfg.total_steps;
  Dataset ds;
  ds.config = cfg;
  ds.gen = first;
  ds.x = Tensor::zeros({static_cast<std::size_t>(total), n});
  ds.z = Tensor::zeros({static_cast<std::size_t>(total), n});

  Rng rng(sub_seed(cfg.seed, "trajectory"));
  std::deque<Tensor> hist;
  for (int l = 0; l < cfg.lag; ++l) hist.push_back(Tensor::zeros({n}));
  Tensor x_prev = Tensor::zeros({n});

  for (std::int64_t step = 0; step < kBurnInSteps + total; ++step) {
    const std::int64_t recorded = step - kBurnInSteps;
    const GeneratorParams& gp =
        (second != nullptr && recorded >= switch_step) ? *second : first;
    std::vector<Tensor> hist_vec(hist.begin(), hist.end());
    Tensor z, x;
    try {
      z = gen_latent_step(gp.latent, hist_vec, rng, cfg.noise_std_z);
      x = gen_obs_step(gp.mixing, x_prev, z, rng, cfg.obs_edges, cfg.noise_std_o);
    } catch (const NumericError& e) {
      throw NumericError("generation diverged at step " + std::to_string(step) +
                         ": " + e.what());
    }
    hist.pop_front();
    hist.push_back(z);
    x_prev = x;
    if (recorded >= 0) {
      for (std::size_t i = 0; i < n; ++i) {
        ds.z.at(static_cast<std::size_t>(recorded), i) = z.v[i];
        ds.x.at(static_cast<std::size_t>(recorded), i) = x.v[i];
      }
    }
  }
  ds.train_begin = 0;
  ds.train_end = total - cfg.validation_size;
  ds.val_begin = ds.train_end;
  ds.val_end = total;
  return ds;
}

}  // namespace

Dataset generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  return simulate(cfg, draw_generator_params(cfg), nullptr, 0);
}

Dataset generate_drift_dataset(const GenConfig& cfg, std::uint64_t drift_seed) {
  cfg.validate();
  GeneratorParams base = draw_generator_params(cfg);
  GenConfig alt = cfg;
  alt.seed = drift_seed;
  GeneratorParams shifted = base;
  shifted.mixing = draw_generator_params(alt).mixing;
  return simulate(cfg, base, &shifted, cfg.total_steps / 2);
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.config.validate();
  const std::size_t total = static_cast<std::size_t>(ds.config.total_steps);
  const std::size_t n = static_cast<std::size_t>(ds.config.n);
  if (ds.x.size() != total * n || ds.z.size() != total * n)
    throw DimensionError("dataset arrays do not match config dimensions");
  BinWriter w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.i64(ds.config.n);
  w.i64(ds.config.lag);
  w.u8(ds.config.obs_edges ? 1 : 0);
  w.i64(ds.config.total_steps);
  w.i64(ds.config.validation_size);
  w.u64(ds.config.seed);
  w.f64(ds.config.noise_std_z);
  w.f64(ds.config.noise_std_o);
  w.u8(ds.config.sparse_mixing ? 1 : 0);
  w.f64_block(ds.x.v);
  w.f64_block(ds.z.v);
  w.finish();
}

Dataset load_dataset(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + ": not a dataset file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError(path + ": unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.config.n = static_cast<int>(r.i64());
  ds.config.lag = static_cast<int>(r.i64());
  ds.config.obs_edges = r.u8() != 0;
  ds.config.total_steps = r.i64();
  ds.config.validation_size = static_cast<int>(r.i64());
  ds.config.seed = r.u64();
  ds.config.noise_std_z = r.f64();
  ds.config.noise_std_o = r.f64();
  ds.config.sparse_mixing = r.u8() != 0;
  ds.config.validate();
  const std::size_t total = static_cast<std::size_t>(ds.config.total_steps);
  const std::size_t n = static_cast<std::size_t>(ds.config.n);
  ds.x = Tensor::zeros({total, n});
  ds.z = Tensor::zeros({total, n});
  ds.x.v = r.f64_block(total * n);
  ds.z.v = r.f64_block(total * n);
  r.check_crc_trailer();
  ds.x.validate();
  ds.z.validate();
  ds.train_begin = 0;
  ds.train_end = ds.config.total_steps - ds.config.validation_size;
  ds.val_begin = ds.train_end;
  ds.val_end = ds.config.total_steps;
  ds.gen = draw_generator_params(ds.config);
  return ds;
}

void export_dataset_csv(const Dataset& ds, const std::string& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(ds.config.total_steps) * ds.config.n * 40);
  out += "step";
  for (int i = 0; i < ds.config.n; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < ds.config.n; ++i) out += ",z" + std::to_string(i);
  out += "\r\n";
  for (std::int64_t t = 0; t < ds.config.total_steps; ++t) {
    out += std::to_string(t);
    for (int i = 0; i < ds.config.n; ++i) {
      out += ',';
      out += fmt_double(ds.x.at(static_cast<std::size_t>(t), static_cast<std::size_t>(i)));
    }
    for (int i = 0; i < ds.config.n; ++i) {
      out += ',';
      out += fmt_double(ds.z.at(static_cast<std::size_t>(t), static_cast<std::size_t>(i)));
    }
    out += "\r\n";
  }
  write_text_file(path, out);
}

GenConfig preset_gen_config(char preset) {
  GenConfig cfg;
  switch (preset) {
    case 'A': cfg.n = 5; cfg.lag = 1; cfg.obs_edges = true; break;
    case 'B': cfg.n = 5; cfg.lag = 1; cfg.obs_edges = false; break;
    case 'C': cfg.n = 5; cfg.lag = 2; cfg.obs_edges = true; break;
    case 'D': cfg.n = 10; cfg.lag = 1; cfg.obs_edges = true; break;
    default:
      throw ConfigError(std::string("unknown preset '") + preset +
                        "', expected one of A, B, C, D");
  }
  return cfg;
}

}  // namespace tot
