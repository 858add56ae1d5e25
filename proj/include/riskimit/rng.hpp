#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace riskimit {

// Deterministic random stream with named substreams.
//
// Substreams are derived from the construction seed, not from the engine
// state, so substream(i) yields the same stream no matter how many draws
// were taken from the parent. Rollout code gives each trajectory its own
// substream keyed by index, which makes batches independent of scheduling
// order and thread count.
//
// Draw primitives are hand-rolled on top of the raw 64-bit output because
// the std:: distributions are implementation-defined; logs must reproduce
// byte-identically across library versions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Independent stream addressed by (seed, index); index 0 is distinct
  // from the parent stream itself.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t next_raw();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform on {0, ..., n - 1}, n >= 1. Rejection-free modulo bias is
  // negligible for the small n used here, but we reject anyway: exact is
  // cheap.
  int uniform_int(int n);

  // Standard normal via Box-Muller (stateless: two uniforms per draw).
  double normal();

  // Standard normal conditioned on [lo, hi], by rejection.
  double truncated_normal(double lo, double hi);

  // Index draw from a probability vector (assumed normalized; the caller
  // validates). Walks the CDF; the final index absorbs rounding slack.
  int categorical(std::span<const double> probs);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used for substream derivation and checksums.
std::uint64_t mix64(std::uint64_t x);

}  // namespace riskimit
