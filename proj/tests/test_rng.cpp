#include <doctest.h>

#include "cvmc/rng.hpp"

using namespace cvmc;

TEST_CASE("counter_draw reproduces the reference splitmix64 sequence for seed 0") {
  CHECK(counter_draw(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(counter_draw(0, 1) == 0x6E789E6AA1B965F4ULL);
  CHECK(counter_draw(0, 2) == 0x06C45D188009454FULL);
}

TEST_CASE("counter_draw matches a sequential splitmix64 run") {
  std::uint64_t state = 42;
  for (int i = 0; i < 16; ++i) {
    state += 0x9E3779B97F4A7C15ULL;
    CHECK(counter_draw(42, i) == mix64(state));
  }
}

TEST_CASE("u01 stays inside the open unit interval") {
  CHECK(u01(0) > 0.0);
  CHECK(u01(~0ULL) < 1.0);
  CHECK(u01(0x8000000000000000ULL) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sample_uniform is deterministic per seed") {
  auto a = sample_uniform(3, 100, 7);
  auto b = sample_uniform(3, 100, 7);
  CHECK(a == b);
  auto c = sample_uniform(3, 100, 8);
  CHECK(a.row(0) != c.row(0));
}

TEST_CASE("sample_uniform shape and range") {
  auto x = sample_uniform(5, 40, 123);
  REQUIRE(x.rows() == 40);
  REQUIRE(x.cols() == 5);
  CHECK(x.minCoeff() > 0.0);
  CHECK(x.maxCoeff() < 1.0);
}

TEST_CASE("coordinate means concentrate at one half") {
  auto x = sample_uniform(2, 1000000, 2024);
  for (int j = 0; j < 2; ++j) CHECK(std::abs(x.col(j).mean() - 0.5) < 0.002);
}

TEST_CASE("row blocks agree with the full draw") {
  auto whole = sample_uniform(4, 100, 5);
  auto head = sample_uniform_rows(4, 0, 60, 5);
  auto tail = sample_uniform_rows(4, 60, 40, 5);
  CHECK(whole.topRows(60) == head);
  CHECK(whole.bottomRows(40) == tail);
}

TEST_CASE("replicate streams differ and recombine deterministically") {
  CHECK(stream_seed(100, 0) == 100);
  CHECK(stream_seed(100, 3) == 103);
  CHECK(sample_uniform(2, 4, stream_seed(9, 1)) != sample_uniform(2, 4, stream_seed(9, 2)));
}
