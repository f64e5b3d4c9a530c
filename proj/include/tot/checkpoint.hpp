#pragma once

#include <cstdint>
#include <string>

#include "tot/model.hpp"
#include "tot/optim.hpp"

namespace tot {

struct TrainCounters {
  std::int64_t epoch = 0;        // next epoch to run
  std::int64_t global_step = 0;  // optimizer steps taken so far
  bool operator==(const TrainCounters&) const = default;
};

// Everything needed to resume training bit-exactly: parameters, optimizer
// moments, the master seed, and the position counters that key every
// randomness stream.
struct Checkpoint {
  ModelConfig model_config;
  ParamStore params;
  AdamState adam;
  std::uint64_t master_seed = 0;
  TrainCounters counters;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tot
