#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mispred {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t hash_tag(std::string_view tag);

/// Hash chain over a master seed and a sequence of integer tags.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

/// Seeded 64-bit stream. Streams derived with `split` are reproducible in
/// isolation, which keeps experiment cells independent of execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t tag) const;

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool coin() { return (engine_() >> 63) != 0; }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mispred
