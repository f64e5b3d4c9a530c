#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tot {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so that generator state is
// four u64 words that serialize into checkpoints exactly, and so draws are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in (0, 1]; never 0 so log() is safe.
  double uniform01();
  double uniform(double a, double b);
  // Box-Muller without a cached spare: one normal costs two uniforms, keeping
  // the state a pure function of draw count.
  double normal();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Named sub-stream derivation: all randomness in the artifact flows from one
// master seed through (name, indices) so components can be varied independently
// and parallel workers never share a mutating stream.
std::uint64_t sub_seed(std::uint64_t master, std::string_view name);
std::uint64_t sub_seed(std::uint64_t master, std::string_view name,
                       std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

std::vector<double> draw_normals(Rng& rng, std::size_t count);

}  // namespace tot
