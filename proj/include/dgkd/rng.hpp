#pragma once

#include <cstdint>
#include <string_view>

namespace dgkd {

/// Deterministic 64-bit generator (SplitMix64, Steele et al. 2014).
///
/// Chosen over std engines because the full state is a single u64 (trivial to
/// checkpoint) and every derived quantity below is specified bit-for-bit, so
/// results are reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-sampled so the result is unbiased
  /// and consumes a deterministic-given-state number of draws.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call; pairs are not cached
  /// so the draw count per sample is fixed).
  double normal();

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from (master, purpose, index).
///
/// Scheme: master is xored with FNV-1a(purpose) and a golden-ratio multiple of
/// index, then passed through one SplitMix64 output step. Streams for distinct
/// (purpose, index) pairs are decorrelated, and adding a stage never perturbs
/// the streams of earlier stages.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0);

}  // namespace dgkd
