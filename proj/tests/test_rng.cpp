#include <doctest.h>

#include <set>

#include "mispred/rng.hpp"

using namespace mispred;

TEST_CASE("mix64 matches the SplitMix64 reference output") {
  // mix64(k * golden) is the (k+1)-th output of SplitMix64 seeded with 0.
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(mix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("derive_seed separates tags and is order sensitive") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(42, {a, b}));
  CHECK(seen.size() == 400);
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
}

TEST_CASE("split streams are reproducible and independent of draw order") {
  Rng base(9);
  Rng a1 = base.split("x");
  base.normal();
  Rng a2 = base.split("x");
  for (int i = 0; i < 10; ++i) CHECK(a1.next() == a2.next());
  Rng b = Rng(9).split("y");
  CHECK(Rng(9).split("x").next() != b.next());
  CHECK(hash_tag("x") != hash_tag("y"));
}

TEST_CASE("coin is fair to within binomial noise") {
  Rng rng(3);
  int heads = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) heads += rng.coin() ? 1 : 0;
  CHECK(std::abs(heads - n / 2) < 4 * 224);  // 4 sd of Binomial(n, 1/2)
}
