#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include "emde/common.hpp"

using namespace emde;

TEST_CASE("rng streams are reproducible and seed dependent") {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(11);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(s2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below covers its range evenly") {
  Rng rng(5);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) ++counts[rng.below(10)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK(rng.below(1) == 0);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
}

TEST_CASE("derived seeds differ by tag and by base") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 20; ++base) {
    for (std::uint64_t tag = 0; tag < 20; ++tag) seen.insert(derive_seed(base, tag));
  }
  CHECK(seen.size() == 400);
  CHECK(hash_string("abc") == hash_string("abc"));
  CHECK(hash_string("abc") != hash_string("abd"));
}

TEST_CASE("format_double round trips exactly") {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(40)) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(parse_double("+2.5") == 2.5);
  CHECK_THROWS_AS(parse_double("1.5x"), Error);
  CHECK_THROWS_AS(parse_double(""), Error);
  CHECK(parse_int("-42") == -42);
  CHECK_THROWS_AS(parse_int("4.2"), Error);
}

TEST_CASE("string splitting") {
  auto ws = split_ws("  a\tbb  c ");
  REQUIRE(ws.size() == 3);
  CHECK(ws[1] == "bb");
  auto parts = split("x, y ,,z", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[1] == "y");
  CHECK(parts[2].empty());
  CHECK(trim("  q ") == "q");
}

TEST_CASE("parallel_for visits every index once for any thread count") {
  for (int threads : {1, 2, 4, 7}) {
    set_thread_count(threads);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  set_thread_count(0);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  set_thread_count(3);
  CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                    if (i == 37) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  set_thread_count(0);
}
