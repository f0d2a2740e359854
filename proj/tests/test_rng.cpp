#include "alzhinet/rng.hpp"

#include <doctest.h>

#include <cmath>

using alzhinet::RngStream;

TEST_SUITE_BEGIN("rng");

TEST_CASE("streams are deterministic") {
  RngStream a(123456789), b(123456789);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in range") {
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-0.25, 0.75);
    CHECK(u >= -0.25);
    CHECK(u < 0.75);
  }
}

TEST_CASE("bounded draw never reaches the bound") {
  RngStream rng(8);
  for (int i = 0; i < 2000; ++i) CHECK(rng.next_below(13) < 13);
}

TEST_CASE("normal moments are sane") {
  RngStream rng(9);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v1 = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  RngStream a(42), b(42);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_SUITE_END();
