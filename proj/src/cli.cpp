#include "tot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tot/baselines.hpp"
#include "tot/chain.hpp"
#include "tot/checkpoint.hpp"
#include "tot/common.hpp"
#include "tot/eval.hpp"
#include "tot/io.hpp"
#include "tot/manifest.hpp"
#include "tot/model.hpp"
#include "tot/operator_lab.hpp"
#include "tot/risk_lab.hpp"
#include "tot/rng.hpp"
#include "tot/synthgen.hpp"
#include "tot/train.hpp"

namespace tot {
namespace {

using ojson = nlohmann::ordered_json;

// Config files are JSON objects merged over defaults; flags win over files.
// Unknown keys are rejected with their full field path so typos surface as
// usage errors instead of silently keeping a default.

ojson load_config_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return ojson::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": invalid json: " + e.what());
  }
}

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const ojson& j, const std::string& path) {
  if (!j.is_object())
    throw ConfigError("config field '" + (path.empty() ? "<root>" : path) +
                      "' must be an object");
}

void reject_unknown(const ojson& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown config field '" + join_path(path, it.key()) + "'");
  }
}

void get_to(const ojson& j, const std::string& path, const char* key, int& dst) {
  if (!j.contains(key)) return;
  const ojson& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("config field '" + join_path(path, key) +
                      "' must be an integer");
  dst = v.get<int>();
}

void get_to(const ojson& j, const std::string& path, const char* key,
            std::int64_t& dst) {
  if (!j.contains(key)) return;
  const ojson& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("config field '" + join_path(path, key) +
                      "' must be an integer");
  dst = v.get<std::int64_t>();
}

void get_to(const ojson& j, const std::string& path, const char* key,
            std::uint64_t& dst) {
  if (!j.contains(key)) return;
  const ojson& v = j.at(key);
  if (v.is_number_unsigned()) {
    dst = v.get<std::uint64_t>();
    return;
  }
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    dst = static_cast<std::uint64_t>(v.get<std::int64_t>());
    return;
  }
  throw ConfigError("config field '" + join_path(path, key) +
                    "' must be a non-negative integer");
}

void get_to(const ojson& j, const std::string& path, const char* key, double& dst) {
  if (!j.contains(key)) return;
  const ojson& v = j.at(key);
  if (!v.is_number())
    throw ConfigError("config field '" + join_path(path, key) +
                      "' must be a number");
  dst = v.get<double>();
}

void get_to(const ojson& j, const std::string& path, const char* key, bool& dst) {
  if (!j.contains(key)) return;
  const ojson& v = j.at(key);
  if (!v.is_boolean())
    throw ConfigError("config field '" + join_path(path, key) +
                      "' must be a boolean");
  dst = v.get<bool>();
}

LossWeights::SignMode sign_mode_from_string(const std::string& s) {
  if (s == "penalize-both" || s == "penalize_both")
    return LossWeights::SignMode::penalize_both;
  if (s == "verbatim") return LossWeights::SignMode::verbatim;
  throw ConfigError("unknown sign mode '" + s +
                    "' (choices: penalize-both, verbatim)");
}

std::string sign_mode_to_string(LossWeights::SignMode m) {
  return m == LossWeights::SignMode::verbatim ? "verbatim" : "penalize-both";
}

void apply_gen_config(const ojson& j, const std::string& path, GenConfig& cfg) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"n", "lag", "obs_edges", "total_steps", "validation_size",
                  "seed", "noise_std_z", "noise_std_o", "sparse_mixing"});
  get_to(j, path, "n", cfg.n);
  get_to(j, path, "lag", cfg.lag);
  get_to(j, path, "obs_edges", cfg.obs_edges);
  get_to(j, path, "total_steps", cfg.total_steps);
  get_to(j, path, "validation_size", cfg.validation_size);
  get_to(j, path, "seed", cfg.seed);
  get_to(j, path, "noise_std_z", cfg.noise_std_z);
  get_to(j, path, "noise_std_o", cfg.noise_std_o);
  get_to(j, path, "sparse_mixing", cfg.sparse_mixing);
}

void apply_model_config(const ojson& j, const std::string& path, ModelConfig& cfg) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"n", "t_in", "horizon", "enc_width", "dec_width", "fore_width",
                  "eta_width", "r_width", "slope", "seed"});
  get_to(j, path, "n", cfg.n);
  get_to(j, path, "t_in", cfg.t_in);
  get_to(j, path, "horizon", cfg.horizon);
  get_to(j, path, "enc_width", cfg.enc_width);
  get_to(j, path, "dec_width", cfg.dec_width);
  get_to(j, path, "fore_width", cfg.fore_width);
  get_to(j, path, "eta_width", cfg.eta_width);
  get_to(j, path, "r_width", cfg.r_width);
  get_to(j, path, "slope", cfg.slope);
  get_to(j, path, "seed", cfg.seed);
}

void apply_weights(const ojson& j, const std::string& path, LossWeights& w) {
  expect_object(j, path);
  reject_unknown(j, path, {"alpha", "beta", "gamma", "sign_mode"});
  get_to(j, path, "alpha", w.alpha);
  get_to(j, path, "beta", w.beta);
  get_to(j, path, "gamma", w.gamma);
  if (j.contains("sign_mode")) {
    const ojson& v = j.at("sign_mode");
    if (!v.is_string())
      throw ConfigError("config field '" + join_path(path, "sign_mode") +
                        "' must be a string");
    w.sign_mode = sign_mode_from_string(v.get<std::string>());
  }
}

void apply_train_config(const ojson& j, const std::string& path, TrainConfig& cfg) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"epochs", "batch_size", "learning_rate", "seed", "grad_clip",
                  "online_steps_per_arrival", "sparsity_samples_per_batch",
                  "windows_per_epoch", "parallel", "weights"});
  get_to(j, path, "epochs", cfg.epochs);
  get_to(j, path, "batch_size", cfg.batch_size);
  get_to(j, path, "learning_rate", cfg.learning_rate);
  get_to(j, path, "seed", cfg.seed);
  get_to(j, path, "grad_clip", cfg.grad_clip);
  get_to(j, path, "online_steps_per_arrival", cfg.online_steps_per_arrival);
  get_to(j, path, "sparsity_samples_per_batch", cfg.sparsity_samples_per_batch);
  get_to(j, path, "windows_per_epoch", cfg.windows_per_epoch);
  get_to(j, path, "parallel", cfg.parallel);
  if (j.contains("weights"))
    apply_weights(j.at("weights"), join_path(path, "weights"), cfg.weights);
}

void apply_direct_config(const ojson& j, const std::string& path,
                         DirectForecastConfig& cfg) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"width", "epochs", "batch_size", "learning_rate", "grad_clip",
                  "seed", "windows_per_epoch"});
  get_to(j, path, "width", cfg.width);
  get_to(j, path, "epochs", cfg.epochs);
  get_to(j, path, "batch_size", cfg.batch_size);
  get_to(j, path, "learning_rate", cfg.learning_rate);
  get_to(j, path, "grad_clip", cfg.grad_clip);
  get_to(j, path, "seed", cfg.seed);
  get_to(j, path, "windows_per_epoch", cfg.windows_per_epoch);
}

ojson gen_config_json(const GenConfig& c) {
  ojson j;
  j["n"] = c.n;
  j["lag"] = c.lag;
  j["obs_edges"] = c.obs_edges;
  j["total_steps"] = c.total_steps;
  j["validation_size"] = c.validation_size;
  j["seed"] = c.seed;
  j["noise_std_z"] = c.noise_std_z;
  j["noise_std_o"] = c.noise_std_o;
  j["sparse_mixing"] = c.sparse_mixing;
  return j;
}

ojson model_config_json(const ModelConfig& c) {
  ojson j;
  j["n"] = c.n;
  j["t_in"] = c.t_in;
  j["horizon"] = c.horizon;
  j["enc_width"] = c.enc_width;
  j["dec_width"] = c.dec_width;
  j["fore_width"] = c.fore_width;
  j["eta_width"] = c.eta_width;
  j["r_width"] = c.r_width;
  j["slope"] = c.slope;
  j["seed"] = c.seed;
  return j;
}

ojson weights_json(const LossWeights& w) {
  ojson j;
  j["alpha"] = w.alpha;
  j["beta"] = w.beta;
  j["gamma"] = w.gamma;
  j["sign_mode"] = sign_mode_to_string(w.sign_mode);
  return j;
}

ojson train_config_json(const TrainConfig& c) {
  ojson j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  j["grad_clip"] = c.grad_clip;
  j["online_steps_per_arrival"] = c.online_steps_per_arrival;
  j["sparsity_samples_per_batch"] = c.sparsity_samples_per_batch;
  j["windows_per_epoch"] = c.windows_per_epoch;
  j["parallel"] = c.parallel;
  j["weights"] = weights_json(c.weights);
  return j;
}

ojson direct_config_json(const DirectForecastConfig& c) {
  ojson j;
  j["t_in"] = c.t_in;
  j["horizon"] = c.horizon;
  j["width"] = c.width;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["grad_clip"] = c.grad_clip;
  j["seed"] = c.seed;
  j["windows_per_epoch"] = c.windows_per_epoch;
  return j;
}

ojson matrix_json(const Tensor& t) {
  ojson rows = ojson::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    ojson row = ojson::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_file(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_json_file(const std::string& path, const ojson& j) {
  write_text_file(path, j.dump(2) + "\n");
}

struct WallTimer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

GenConfig parse_preset(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'D') return preset_gen_config(s[0]);
  throw ConfigError("unknown preset '" + s + "' (available presets: A, B, C, D)");
}

TotModel model_from_checkpoint(const Checkpoint& ck) {
  TotModel m = build_model(ck.model_config);
  m.params = ck.params;
  return m;
}

Tensor rows_of(const Tensor& t, std::int64_t begin, std::int64_t end) {
  const std::size_t n = t.cols();
  Tensor out = Tensor::zeros({static_cast<std::size_t>(end - begin), n});
  for (std::int64_t r = begin; r < end; ++r)
    for (std::size_t j = 0; j < n; ++j)
      out.at(static_cast<std::size_t>(r - begin), j) =
          t.at(static_cast<std::size_t>(r), j);
  return out;
}

DiscreteLatentChain chain_from_opts(const std::string& chain_path, int k, int m,
                                    std::uint64_t seed, RunManifest& man) {
  if (!chain_path.empty()) {
    man.inputs.push_back(fingerprint_file(chain_path));
    return load_chain_file(chain_path);
  }
  Rng rng(sub_seed(seed, "chain"));
  return random_chain(k, m, rng);
}

// --- subcommands -------------------------------------------------------------

struct GenOpts {
  std::string preset, config, out, csv;
  std::uint64_t seed = 1;
  bool sparse = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* sparse_opt = nullptr;
};

void run_gen(const GenOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "gen";
  GenConfig cfg;
  if (!o.preset.empty()) cfg = parse_preset(o.preset);
  if (!o.config.empty()) {
    man.inputs.push_back(fingerprint_file(o.config));
    apply_gen_config(load_config_file(o.config), "", cfg);
  }
  if (o.seed_opt->count() > 0) cfg.seed = o.seed;
  if (o.sparse_opt->count() > 0) cfg.sparse_mixing = o.sparse;
  cfg.validate();

  Dataset ds = generate_dataset(cfg);
  save_dataset(ds, o.out);
  man.outputs.push_back(o.out);
  if (!o.csv.empty()) {
    export_dataset_csv(ds, o.csv);
    man.outputs.push_back(o.csv);
  }
  man.seed = cfg.seed;
  man.config_json = gen_config_json(cfg).dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, o.out + ".manifest.json");
}

struct TrainOpts {
  std::string data, config, out, resume, sign_mode;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* sign_opt = nullptr;
};

void run_train(const TrainOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "train";
  man.inputs.push_back(fingerprint_file(o.data));
  Dataset ds = load_dataset(o.data);

  ModelConfig mc;
  mc.n = ds.config.n;
  TrainConfig tc;
  if (!o.config.empty()) {
    man.inputs.push_back(fingerprint_file(o.config));
    ojson j = load_config_file(o.config);
    expect_object(j, "");
    reject_unknown(j, "", {"model", "train"});
    if (j.contains("model")) apply_model_config(j.at("model"), "model", mc);
    if (j.contains("train")) apply_train_config(j.at("train"), "train", tc);
  }
  if (o.seed_opt->count() > 0) {
    mc.seed = o.seed;
    tc.seed = o.seed;
  }
  if (o.sign_opt->count() > 0)
    tc.weights.sign_mode = sign_mode_from_string(o.sign_mode);
  if (mc.n != ds.config.n)
    throw ConfigError("model n=" + std::to_string(mc.n) +
                      " does not match dataset n=" + std::to_string(ds.config.n));

  TotModel model;
  AdamState adam;
  TrainCounters counters;
  if (!o.resume.empty()) {
    man.inputs.push_back(fingerprint_file(o.resume));
    Checkpoint ck = load_checkpoint(o.resume);
    if (ck.model_config.n != ds.config.n)
      throw ConfigError("checkpoint n=" + std::to_string(ck.model_config.n) +
                        " does not match dataset n=" +
                        std::to_string(ds.config.n));
    mc = ck.model_config;
    tc.seed = ck.master_seed;
    model = model_from_checkpoint(ck);
    adam = ck.adam;
    counters = ck.counters;
  } else {
    mc.validate();
    model = build_model(mc);
    adam = AdamState::init_like(model.params);
  }
  tc.validate();
  const std::int64_t first_epoch = counters.epoch;

  TrainHistory hist = train_offline(ds, model, tc, adam, counters);

  ensure_dir(o.out);
  const std::string ckpt_path = join_file(o.out, "model.totc");
  save_checkpoint({mc, model.params, adam, tc.seed, counters}, ckpt_path);
  man.outputs.push_back(ckpt_path);

  std::string csv =
      "epoch,l_y,l_r,l_kl_z,l_kl_o,l_s,total,grad_norm,guard_hits\r\n";
  for (std::size_t i = 0; i < hist.epochs.size(); ++i) {
    const EpochStats& e = hist.epochs[i];
    csv += std::to_string(first_epoch + static_cast<std::int64_t>(i)) + "," +
           fmt_double(e.mean.l_y) + "," + fmt_double(e.mean.l_r) + "," +
           fmt_double(e.mean.l_kl_z) + "," + fmt_double(e.mean.l_kl_o) + "," +
           fmt_double(e.mean.l_s) + "," + fmt_double(e.mean.total) + "," +
           fmt_double(e.grad_norm_mean) + "," + std::to_string(e.guard_hits) +
           "\r\n";
  }
  const std::string hist_path = join_file(o.out, "history.csv");
  write_text_file(hist_path, csv);
  man.outputs.push_back(hist_path);

  man.seed = tc.seed;
  ojson snap;
  snap["model"] = model_config_json(mc);
  snap["train"] = train_config_json(tc);
  man.config_json = snap.dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

struct EvalOpts {
  std::string ckpt, data, out;
};

void run_eval(const EvalOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "eval";
  man.inputs.push_back(fingerprint_file(o.ckpt));
  man.inputs.push_back(fingerprint_file(o.data));
  Checkpoint ck = load_checkpoint(o.ckpt);
  Dataset ds = load_dataset(o.data);
  if (ck.model_config.n != ds.config.n)
    throw ConfigError("checkpoint n=" + std::to_string(ck.model_config.n) +
                      " does not match dataset n=" + std::to_string(ds.config.n));
  TotModel model = model_from_checkpoint(ck);

  const std::int64_t begin =
      std::max(ds.val_begin, static_cast<std::int64_t>(model.cfg.t_in) - 1);
  Tensor z_est = encode_series(model, ds, begin, ds.val_end);
  Tensor z_true = rows_of(ds.z, begin, ds.val_end);
  MccReport mr = mcc(z_true, z_est);
  ForecastMetrics fm = validation_forecast_metrics(model, ds);

  ojson j;
  j["n"] = ds.config.n;
  j["latent_eval_begin"] = begin;
  j["latent_eval_end"] = ds.val_end;
  ojson jm;
  jm["score"] = mr.score;
  jm["assignment"] = mr.assignment;
  jm["abs_corr"] = matrix_json(mr.abs_corr);
  j["mcc"] = std::move(jm);
  ojson jf;
  jf["mse"] = fm.mse;
  jf["mae"] = fm.mae;
  j["forecast"] = std::move(jf);

  ensure_dir(o.out);
  const std::string metrics_path = join_file(o.out, "metrics.json");
  write_json_file(metrics_path, j);
  man.outputs.push_back(metrics_path);

  man.seed = ck.master_seed;
  man.config_json = model_config_json(ck.model_config).dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

struct OnlineOpts {
  std::string ckpt, data, config, out;
  int k_steps = 1;
  std::uint64_t seed = 1;
  CLI::Option* k_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void run_online(const OnlineOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "online";
  man.inputs.push_back(fingerprint_file(o.ckpt));
  man.inputs.push_back(fingerprint_file(o.data));
  Checkpoint ck = load_checkpoint(o.ckpt);
  Dataset ds = load_dataset(o.data);
  if (ck.model_config.n != ds.config.n)
    throw ConfigError("checkpoint n=" + std::to_string(ck.model_config.n) +
                      " does not match dataset n=" + std::to_string(ds.config.n));

  TrainConfig tc;
  tc.seed = ck.master_seed;
  if (!o.config.empty()) {
    man.inputs.push_back(fingerprint_file(o.config));
    ojson j = load_config_file(o.config);
    expect_object(j, "");
    reject_unknown(j, "", {"train"});
    if (j.contains("train")) apply_train_config(j.at("train"), "train", tc);
  }
  if (o.k_opt->count() > 0) tc.online_steps_per_arrival = o.k_steps;
  if (o.seed_opt->count() > 0) tc.seed = o.seed;
  tc.validate();

  TotModel model = model_from_checkpoint(ck);
  AdamState adam = ck.adam;
  TrainCounters counters = ck.counters;
  OnlineResult res = online_run(ds, model, tc, adam, counters);

  ensure_dir(o.out);
  std::string csv = "arrival,mse,mae,cum_mse,cum_mae,adapt_total\r\n";
  for (const OnlineRow& r : res.rows)
    csv += std::to_string(r.arrival) + "," + fmt_double(r.mse) + "," +
           fmt_double(r.mae) + "," + fmt_double(r.cum_mse) + "," +
           fmt_double(r.cum_mae) + "," + fmt_double(r.adapt.total) + "\r\n";
  const std::string csv_path = join_file(o.out, "online.csv");
  write_text_file(csv_path, csv);
  man.outputs.push_back(csv_path);

  ojson j;
  j["arrivals"] = res.rows.size();
  j["k_steps"] = tc.online_steps_per_arrival;
  j["mean_mse"] = res.mean_mse;
  j["mean_mae"] = res.mean_mae;
  const std::string metrics_path = join_file(o.out, "metrics.json");
  write_json_file(metrics_path, j);
  man.outputs.push_back(metrics_path);

  const std::string adapted_path = join_file(o.out, "adapted.totc");
  save_checkpoint({ck.model_config, model.params, adam, tc.seed, counters},
                  adapted_path);
  man.outputs.push_back(adapted_path);

  man.seed = tc.seed;
  ojson snap;
  snap["train"] = train_config_json(tc);
  man.config_json = snap.dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

struct RiskOpts {
  std::string chain, channel = "identity", out;
  int k = 3, m = 3;
  double p_flip = 0.2;
  std::uint64_t seed = 1;
};

void run_risk_lab(const RiskOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "risk-lab";
  DiscreteLatentChain c = chain_from_opts(o.chain, o.k, o.m, o.seed, man);

  ChannelSpec spec;
  spec.kind = channel_kind_from_string(o.channel);
  spec.p_flip = o.p_flip;
  spec.seed = o.seed;
  spec.validate(c.k);
  RiskReport rep = risk_lab(c, spec);

  ojson j;
  j["chain"] = ojson::parse(chain_to_json(c));
  ojson jc;
  jc["kind"] = channel_kind_to_string(spec.kind);
  jc["p_flip"] = spec.p_flip;
  jc["seed"] = spec.seed;
  j["channel"] = std::move(jc);
  ojson jr;
  jr["r_z"] = rep.r_z;
  jr["r_o"] = rep.r_o;
  jr["r_zhat"] = rep.r_zhat;
  jr["cross_term"] = rep.cross_term;
  jr["decomposition_residual"] = rep.decomposition_residual;
  j["risk"] = std::move(jr);

  ensure_dir(o.out);
  const std::string path = join_file(o.out, "risk.json");
  write_json_file(path, j);
  man.outputs.push_back(path);

  man.seed = o.seed;
  ojson snap;
  snap["k"] = c.k;
  snap["m"] = c.m;
  snap["channel"] = channel_kind_to_string(spec.kind);
  snap["p_flip"] = spec.p_flip;
  man.config_json = snap.dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

struct OperatorOpts {
  std::string chain, out;
  int k = 3, m = 3;
  std::uint64_t seed = 1;
};

void run_operator_lab_cmd(const OperatorOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "operator-lab";
  DiscreteLatentChain c = chain_from_opts(o.chain, o.k, o.m, o.seed, man);

  OperatorLabResult res = run_operator_lab(c);

  ojson j;
  j["chain"] = ojson::parse(chain_to_json(c));
  ojson anchors = ojson::array();
  for (const AnchorResult& a : res.anchors) {
    ojson ja;
    ja["x_t"] = a.x_t;
    ja["x_m1"] = a.x_m1;
    ja["xb_t"] = a.xb_t;
    ja["xb_m1"] = a.xb_m1;
    ja["eigenvalues"] = a.spectral.eigenvalues;
    ja["eigen_gap"] = a.spectral.eigen_gap;
    ja["max_imag"] = a.spectral.max_imag;
    ja["alignment"] = a.spectral.alignment;
    ja["kernel"] = matrix_json(a.spectral.kernels);
    ja["max_kernel_err"] = a.spectral.max_kernel_err;
    ja["max_eigenvalue_err"] = a.spectral.max_eigenvalue_err;
    anchors.push_back(std::move(ja));
  }
  j["anchors"] = std::move(anchors);
  j["max_kernel_err"] = res.max_kernel_err;
  j["max_eigenvalue_err"] = res.max_eigenvalue_err;

  ensure_dir(o.out);
  const std::string path = join_file(o.out, "operator.json");
  write_json_file(path, j);
  man.outputs.push_back(path);

  man.seed = o.seed;
  ojson snap;
  snap["k"] = c.k;
  snap["m"] = c.m;
  man.config_json = snap.dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

struct BaselinesOpts {
  std::string data, ckpt, config, out, sign_mode;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* sign_opt = nullptr;
};

void run_baselines(const BaselinesOpts& o) {
  WallTimer timer;
  RunManifest man;
  man.subcommand = "baselines";
  man.inputs.push_back(fingerprint_file(o.data));
  Dataset ds = load_dataset(o.data);

  ModelConfig mc;
  mc.n = ds.config.n;
  TrainConfig tc;
  DirectForecastConfig dc;
  ojson j;
  if (!o.config.empty()) {
    man.inputs.push_back(fingerprint_file(o.config));
    j = load_config_file(o.config);
    expect_object(j, "");
    reject_unknown(j, "", {"model", "train", "direct"});
    if (j.contains("model")) apply_model_config(j.at("model"), "model", mc);
    if (j.contains("train")) apply_train_config(j.at("train"), "train", tc);
    if (j.contains("direct")) apply_direct_config(j.at("direct"), "direct", dc);
  }
  if (o.seed_opt->count() > 0) {
    mc.seed = o.seed;
    tc.seed = o.seed;
    dc.seed = o.seed;
  }
  if (o.sign_opt->count() > 0)
    tc.weights.sign_mode = sign_mode_from_string(o.sign_mode);

  TotModel trained;
  if (!o.ckpt.empty()) {
    man.inputs.push_back(fingerprint_file(o.ckpt));
    Checkpoint ck = load_checkpoint(o.ckpt);
    if (ck.model_config.n != ds.config.n)
      throw ConfigError("checkpoint n=" + std::to_string(ck.model_config.n) +
                        " does not match dataset n=" +
                        std::to_string(ds.config.n));
    mc = ck.model_config;
    trained = model_from_checkpoint(ck);
  } else {
    if (mc.n != ds.config.n)
      throw ConfigError("model n=" + std::to_string(mc.n) +
                        " does not match dataset n=" +
                        std::to_string(ds.config.n));
    mc.validate();
    tc.validate();
    trained = build_model(mc);
    train_offline(ds, trained, tc);
  }
  dc.validate();
  BaselineReport rep = baseline_suite(ds, trained, dc);

  ojson jr;
  jr["mse_x_only"] = rep.mse_x_only;
  jr["mse_tot"] = rep.mse_tot;
  jr["mse_oracle"] = rep.mse_oracle;
  jr["gap_fraction"] = rep.gap_fraction;

  ensure_dir(o.out);
  const std::string json_path = join_file(o.out, "baselines.json");
  write_json_file(json_path, jr);
  man.outputs.push_back(json_path);

  std::string csv = "x_only,tot,oracle_true_z\r\n" + fmt_double(rep.mse_x_only) +
                    "," + fmt_double(rep.mse_tot) + "," +
                    fmt_double(rep.mse_oracle) + "\r\n";
  const std::string csv_path = join_file(o.out, "baselines.csv");
  write_text_file(csv_path, csv);
  man.outputs.push_back(csv_path);

  man.seed = o.seed;
  ojson snap;
  snap["model"] = model_config_json(mc);
  snap["train"] = train_config_json(tc);
  snap["direct"] = direct_config_json(dc);
  man.config_json = snap.dump();
  man.wall_seconds = timer.seconds();
  write_manifest(man, join_file(o.out, "manifest.json"));
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Latent-variable time-series toolkit: synthetic generation, "
               "variational training, online adaptation, and exact theory labs"};
  app.require_subcommand(1);

  GenOpts gen_o;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--preset", gen_o.preset, "Named preset: A, B, C, or D");
  gen->add_option("--config", gen_o.config, "JSON config file");
  gen_o.seed_opt = gen->add_option("--seed", gen_o.seed, "Master seed");
  gen_o.sparse_opt =
      gen->add_flag("--sparse", gen_o.sparse, "Banded sparse mixing support");
  gen->add_option("--out", gen_o.out, "Output dataset path (.totd)")->required();
  gen->add_option("--csv", gen_o.csv, "Also export the series as CSV");

  TrainOpts train_o;
  CLI::App* train = app.add_subcommand("train", "Train a model offline");
  train->add_option("--data", train_o.data, "Dataset path (.totd)")->required();
  train->add_option("--config", train_o.config, "JSON config file");
  train_o.seed_opt = train->add_option("--seed", train_o.seed, "Master seed");
  train_o.sign_opt = train->add_option(
      "--sign-mode", train_o.sign_mode,
      "Divergence sign handling: penalize-both or verbatim");
  train->add_option("--resume", train_o.resume, "Checkpoint to resume from");
  train->add_option("--out", train_o.out, "Output directory")->required();

  EvalOpts eval_o;
  CLI::App* eval = app.add_subcommand("eval", "Latent and forecast metrics");
  eval->add_option("--ckpt", eval_o.ckpt, "Checkpoint path (.totc)")->required();
  eval->add_option("--data", eval_o.data, "Dataset path (.totd)")->required();
  eval->add_option("--out", eval_o.out, "Output directory")->required();

  OnlineOpts online_o;
  CLI::App* online =
      app.add_subcommand("online", "Causal forecast-then-adapt protocol");
  online->add_option("--ckpt", online_o.ckpt, "Checkpoint path (.totc)")
      ->required();
  online->add_option("--data", online_o.data, "Dataset path (.totd)")->required();
  online->add_option("--config", online_o.config, "JSON config file");
  online_o.k_opt = online->add_option("--k-steps", online_o.k_steps,
                                      "Adaptation steps per arrival");
  online_o.seed_opt = online->add_option("--seed", online_o.seed, "Master seed");
  online->add_option("--out", online_o.out, "Output directory")->required();

  RiskOpts risk_o;
  CLI::App* risk =
      app.add_subcommand("risk-lab", "Exact predictive-risk decomposition");
  risk->add_option("--chain", risk_o.chain, "Chain spec JSON (else random)");
  risk->add_option("--k", risk_o.k, "Latent states for a random chain");
  risk->add_option("--m", risk_o.m, "Observed states for a random chain");
  risk->add_option("--channel", risk_o.channel,
                   "identity, bijection, noisy, or independent");
  risk->add_option("--p-flip", risk_o.p_flip,
                   "Noisy channel resample probability");
  risk->add_option("--seed", risk_o.seed, "Master seed");
  risk->add_option("--out", risk_o.out, "Output directory")->required();

  OperatorOpts op_o;
  CLI::App* op =
      app.add_subcommand("operator-lab", "Spectral kernel identification");
  op->add_option("--chain", op_o.chain, "Chain spec JSON (else random)");
  op->add_option("--k", op_o.k, "Latent states for a random chain");
  op->add_option("--m", op_o.m, "Observed states for a random chain");
  op->add_option("--seed", op_o.seed, "Master seed");
  op->add_option("--out", op_o.out, "Output directory")->required();

  BaselinesOpts base_o;
  CLI::App* base = app.add_subcommand(
      "baselines", "Forecast MSE: history-only vs latent model vs oracle");
  base->add_option("--data", base_o.data, "Dataset path (.totd)")->required();
  base->add_option("--ckpt", base_o.ckpt,
                   "Trained checkpoint (else trains internally)");
  base->add_option("--config", base_o.config, "JSON config file");
  base_o.seed_opt = base->add_option("--seed", base_o.seed, "Master seed");
  base_o.sign_opt = base->add_option(
      "--sign-mode", base_o.sign_mode,
      "Divergence sign handling: penalize-both or verbatim");
  base->add_option("--out", base_o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) run_gen(gen_o);
    else if (train->parsed()) run_train(train_o);
    else if (eval->parsed()) run_eval(eval_o);
    else if (online->parsed()) run_online(online_o);
    else if (risk->parsed()) run_risk_lab(risk_o);
    else if (op->parsed()) run_operator_lab_cmd(op_o);
    else if (base->parsed()) run_baselines(base_o);
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  }
}

}  // namespace tot
