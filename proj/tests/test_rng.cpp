#include <catch2/catch_amalgamated.hpp>

#include "smf/rng.hpp"

using smf::CounterRng;

TEST_CASE("fixed seed reproduces the same draws") {
  const CounterRng rng(12345, 7);
  const Eigen::VectorXd a = smf::sample_sigma(rng, 42, 0, 8);
  const Eigen::VectorXd b = smf::sample_sigma(rng, 42, 0, 8);
  REQUIRE(a == b);

  const CounterRng rng2(12345, 7);
  REQUIRE(smf::sample_sigma(rng2, 42, 0, 8) == a);
}

TEST_CASE("different steps, families and trajectories give different draws") {
  const CounterRng rng(1, 0);
  REQUIRE(rng.normal(0, 0) != rng.normal(1, 0));
  REQUIRE(rng.normal(0, 0) != rng.normal(0, 1));
  const CounterRng other(1, 1);
  REQUIRE(rng.normal(0, 0) != other.normal(0, 0));
}

TEST_CASE("sample moments of 1e6 draws") {
  const CounterRng rng(2024, 0);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(i, 0);
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // 3 sigma of the estimators: SE(mean) = 1e-3, SE(var) ~ sqrt(2/n)
  REQUIRE(std::abs(mean) < 0.004);
  REQUIRE(std::abs(var - 1.0) < 0.005);
}

TEST_CASE("streams of distinct trajectories are uncorrelated") {
  const CounterRng r0(99, 0);
  const CounterRng r1(99, 1);
  const int n = 100000;
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
  for (int i = 0; i < n; ++i) {
    const double a = r0.normal(i, 0);
    const double b = r1.normal(i, 0);
    s0 += a; s1 += b; s00 += a * a; s11 += b * b; s01 += a * b;
  }
  const double cov = s01 / n - (s0 / n) * (s1 / n);
  const double corr = cov / std::sqrt((s00 / n - (s0 / n) * (s0 / n)) *
                                      (s11 / n - (s1 / n) * (s1 / n)));
  REQUIRE(std::abs(corr) < 0.01);
}

TEST_CASE("the two noise families of one trajectory are uncorrelated") {
  const CounterRng rng(7, 3);
  const int n = 100000;
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
  for (int i = 0; i < n; ++i) {
    const double a = smf::sample_sigma(rng, i, 0, 1)[0];
    const double b = smf::sample_sigma(rng, i, 1, 1)[0];
    s0 += a; s1 += b; s00 += a * a; s11 += b * b; s01 += a * b;
  }
  const double cov = s01 / n - (s0 / n) * (s1 / n);
  const double corr = cov / std::sqrt((s00 / n - (s0 / n) * (s0 / n)) *
                                      (s11 / n - (s1 / n) * (s1 / n)));
  REQUIRE(std::abs(corr) < 0.01);
}
