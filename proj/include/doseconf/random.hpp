#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace doseconf {

/// Derives an independent 64-bit seed for a named sub-stream of a master seed.
/// Streams used by the harness: "data", "split", "learner", "propensity",
/// "noise", "phi".
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

/// Thin wrapper over a 64-bit Mersenne Twister with the draws the generators
/// need. Each draw constructs a fresh distribution so no hidden state
/// survives between calls.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::string_view stream) : engine_(derive_seed(master, stream)) {}

  double uniform(double lo = 0.0, double hi = 1.0);
  /// Integer uniform on the closed range [lo, hi].
  long uniform_int(long lo, long hi);
  double normal(double mean = 0.0, double sd = 1.0);
  double student_t(double df);
  double beta(double a, double b);
  bool bernoulli(double p);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace doseconf
