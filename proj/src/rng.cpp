#include "mireg/rng.hpp"

#include <cmath>

namespace mireg {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  // 53 random bits -> [0,1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] keeps the log finite
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Eigen::Vector3d Rng::unit_vector() {
  while (true) {
    Eigen::Vector3d v(normal(), normal(), normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Eigen::Matrix3d Rng::rotation() {
  // uniform quaternion (Shoemake subgroup method)
  const double u1 = uniform();
  const double u2 = uniform();
  const double u3 = uniform();
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const Eigen::Quaterniond q(a * std::sin(2.0 * M_PI * u2), a * std::cos(2.0 * M_PI * u2),
                             b * std::sin(2.0 * M_PI * u3), b * std::cos(2.0 * M_PI * u3));
  return q.normalized().toRotationMatrix();
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(splitmix64(splitmix64(seed_ ^ 0x5851f42d4c957f2dULL) ^ stream));
}

}  // namespace mireg
