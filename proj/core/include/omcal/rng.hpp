#pragma once

#include <cstdint>
#include <string_view>

namespace omcal {

// FNV-1a 64-bit hash; used for stream keying and input provenance.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

// Small counter-based generator (splitmix64). Chosen over <random> engines
// so that streams can be split per grid point by key and draws are
// bit-identical across platforms and thread schedules.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent stream derived from a master seed and a stable key.
  static Rng stream(std::uint64_t master_seed, std::string_view key) {
    return Rng(fnv1a64(key, master_seed ^ 0x9e3779b97f4a7c15ull));
  }

  std::uint64_t next_u64();

  // Uniform in the open interval (0, 1).
  double uniform();

  // Standard normal via Box-Muller; one value per call, no caching so the
  // draw sequence is independent of call-site pairing.
  double gaussian();

  // Lognormal factor with unit mean: exp(sigma*z - sigma^2/2).
  double lognormal_unit_mean(double sigma);

 private:
  std::uint64_t state_;
};

}  // namespace omcal
