#include "tot/checkpoint.hpp"

#include <cstring>
#include <string>

#include "tot/common.hpp"
#include "tot/io.hpp"

namespace tot {
namespace {

constexpr char kMagic[4] = {'T', 'O', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_tensor(BinWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) w.u64(d);
  w.f64_block(t.v);
}

Tensor read_tensor(BinReader& r) {
  const std::uint32_t nd = r.u32();
  if (nd > 8) throw IoError("checkpoint tensor rank out of range");
  std::vector<std::size_t> shape;
  for (std::uint32_t i = 0; i < nd; ++i)
    shape.push_back(static_cast<std::size_t>(r.u64()));
  Tensor t = Tensor::zeros(shape);
  t.v = r.f64_block(shape_numel(shape));
  return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.model_config.validate();
  if (ckpt.adam.m.size() != ckpt.params.size() ||
      ckpt.adam.v.size() != ckpt.params.size())
    throw DimensionError("checkpoint optimizer state does not match parameters");
  BinWriter w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  const ModelConfig& c = ckpt.model_config;
  w.i64(c.n);
  w.i64(c.t_in);
  w.i64(c.horizon);
  w.i64(c.enc_width);
  w.i64(c.dec_width);
  w.i64(c.fore_width);
  w.i64(c.eta_width);
  w.i64(c.r_width);
  w.f64(c.slope);
  w.u64(c.seed);
  w.u64(ckpt.master_seed);
  w.i64(ckpt.counters.epoch);
  w.i64(ckpt.counters.global_step);
  w.i64(ckpt.adam.step);
  w.u64(ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& [name, tensor] = ckpt.params.item(i);
    w.str(name);
    write_tensor(w, tensor);
    write_tensor(w, ckpt.adam.m[i]);
    write_tensor(w, ckpt.adam.v[i]);
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ModelConfig& c = ckpt.model_config;
  c.n = static_cast<int>(r.i64());
  c.t_in = static_cast<int>(r.i64());
  c.horizon = static_cast<int>(r.i64());
  c.enc_width = static_cast<int>(r.i64());
  c.dec_width = static_cast<int>(r.i64());
  c.fore_width = static_cast<int>(r.i64());
  c.eta_width = static_cast<int>(r.i64());
  c.r_width = static_cast<int>(r.i64());
  c.slope = r.f64();
  c.seed = r.u64();
  c.validate();
  ckpt.master_seed = r.u64();
  ckpt.counters.epoch = r.i64();
  ckpt.counters.global_step = r.i64();
  ckpt.adam.step = r.i64();
  const std::uint64_t count = r.u64();
  if (count > 1u << 20) throw IoError("checkpoint parameter count out of range");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    Tensor t = read_tensor(r);
    Tensor am = read_tensor(r);
    Tensor av = read_tensor(r);
    if (!am.same_shape(t) || !av.same_shape(t))
      throw IoError("checkpoint moment shapes disagree for " + name);
    ckpt.params.add(name, std::move(t));
    ckpt.adam.m.push_back(std::move(am));
    ckpt.adam.v.push_back(std::move(av));
  }
  r.check_crc_trailer();
  // Structural consistency with a freshly built model of the same config.
  TotModel fresh = build_model(c);
  if (fresh.params.size() != ckpt.params.size())
    throw IoError(path + ": parameter table does not match model config");
  for (std::size_t i = 0; i < fresh.params.size(); ++i) {
    const auto& [name, tensor] = fresh.params.item(i);
    const auto& [lname, ltensor] = ckpt.params.item(i);
    if (name != lname || !tensor.same_shape(ltensor))
      throw IoError(path + ": parameter " + lname + " does not match model config");
  }
  return ckpt;
}

}  // namespace tot
