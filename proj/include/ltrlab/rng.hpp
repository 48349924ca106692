#pragma once

#include <cstdint>
#include <string_view>

namespace ltrlab {

// Deterministic, platform-independent random source. All stochastic
// components in the toolkit draw from this generator so that a fixed
// seed reproduces experiments bit-for-bit; the std <random>
// distributions are avoided on purpose (their output is
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform in [0, n).
  std::size_t uniform_index(std::size_t n);

  bool bernoulli(double p);

  // Box-Muller; the spare draw is cached.
  double normal(double mean, double sigma);

  // Marsaglia-Tsang via two gamma draws.
  double gamma(double shape);
  double beta(double a, double b);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Seed derivation for independent sub-streams. Deriving with a tag or
// index decorrelates streams so that parallel workers (per group, per
// variant, per session) stay reproducible regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);
std::uint64_t fnv1a_hash(std::string_view bytes);

}  // namespace ltrlab
