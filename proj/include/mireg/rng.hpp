#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace mireg {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact per
// the standard); all distribution sampling is done by hand so the stream is
// identical across platforms and toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);           // inclusive bounds
  double normal();                           // standard normal, Box-Muller
  Eigen::Vector3d unit_vector();
  Eigen::Matrix3d rotation();                // uniform over SO(3)

  // Independent substream; forking with the same stream id twice gives the
  // same substream.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mireg
