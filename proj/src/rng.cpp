#include "riskimit/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace riskimit {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(mix64(seed_ ^ mix64(index + 1)));
}

std::uint64_t RngStream::next_raw() { return engine_(); }

double RngStream::uniform() {
  return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  const std::uint64_t span = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t raw;
  do {
    raw = next_raw();
  } while (raw >= limit);
  return static_cast<int>(raw % span);
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]: keeps log finite
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::truncated_normal(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncated_normal: lo < hi");
  for (;;) {
    const double z = normal();
    if (z >= lo && z <= hi) return z;
  }
}

int RngStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("categorical: empty support");
  const double u = uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace riskimit
