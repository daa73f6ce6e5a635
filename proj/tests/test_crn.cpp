#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "jini/crn.hpp"
#include "jini/error.hpp"

using namespace jini;

namespace {

// Smallest k with sum_{j<=k} pmf(j) >= u, pmf from lgamma directly.
std::int64_t oracle_poisson_q(double u, double lambda) {
  double cdf = 0.0;
  for (std::int64_t k = 0;; ++k) {
    cdf += std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0));
    if (cdf >= u) return k;
  }
}

std::int64_t oracle_negbin_q(double u, double mu, double alpha) {
  const double r = 1.0 / alpha;
  double cdf = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double lp = std::lgamma(k + r) - std::lgamma(k + 1.0) - std::lgamma(r) +
                      r * std::log(r / (r + mu)) + k * std::log(mu / (r + mu));
    cdf += std::exp(lp);
    if (cdf >= u) return k;
  }
}

}  // namespace

TEST_CASE("philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("bank is deterministic and addressable") {
  const auto a = make_bank(42, 2, 3);
  const auto b = make_bank(42, 2, 3);
  CHECK(a == b);
  CHECK(a.H() == 2);
  CHECK(a.n() == 3);
  CHECK_FALSE(a == make_bank(43, 2, 3));
  // a larger bank shares its leading entries
  const auto big = make_bank(42, 200, 100);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 3; ++i) CHECK(big(h, i) == a(h, i));
  for (std::size_t h = 0; h < 200; ++h)
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(big(h, i) > 0.0);
      CHECK(big(h, i) < 1.0);
    }
  const auto one = make_bank(1, 1, 1);
  CHECK(one(0, 0) > 0.0);
  CHECK(one(0, 0) < 1.0);
  CHECK_THROWS_AS(make_bank(1, 0, 3), InvalidArgument);
  CHECK_THROWS_AS(make_bank(1, 3, 0), InvalidArgument);
}

TEST_CASE("rng stream positions") {
  RngStream s(7, 3);
  const double u0 = s.uniform();
  const double u1 = s.uniform();
  CHECK(s.counter() == 2);
  CHECK(s.uniform_at(0) == u0);
  CHECK(s.uniform_at(1) == u1);
  CHECK(RngStream(7, 3).uniform() == u0);
  CHECK(RngStream(7, 4).uniform() != u0);
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
}

TEST_CASE("bernoulli quantile") {
  CHECK(bernoulli_q(0.3, 0.5) == 1);
  CHECK(bernoulli_q(0.9, 0.0) == 0);
  CHECK(bernoulli_q(0.1, 1.0) == 1);
  CHECK(bernoulli_q(0.5, 0.5) == 0);
  CHECK_THROWS_AS(bernoulli_q(0.5, 1.5), InvalidArgument);
  CHECK_THROWS_AS(bernoulli_q(0.5, -0.1), InvalidArgument);
}

TEST_CASE("poisson quantile") {
  CHECK(poisson_q(0.7, 0.0) == 0);
  CHECK(poisson_q(0.5, 1.0) == 1);
  CHECK(poisson_q(0.99, 1.0) == 4);
  CHECK_THROWS_AS(poisson_q(0.5, -1.0), InvalidArgument);
  CHECK_THROWS_AS(poisson_q(0.5, INFINITY), InvalidArgument);
  for (double lambda : {0.05, 0.7, 3.0, 25.0, 300.0}) {
    for (int g = 1; g <= 200; ++g) {
      const double u = (g - 0.5) / 200.0;
      CHECK(poisson_q(u, lambda) == oracle_poisson_q(u, lambda));
    }
  }
}

TEST_CASE("poisson quantile for huge means is near the normal approximation") {
  // pmf(0) underflows here, exercising the mode-anchored path
  const double lambda = 1e5;
  const auto med = poisson_q(0.5, lambda);
  CHECK(std::abs(static_cast<double>(med) - lambda) < 2.0);
  const auto hi = poisson_q(0.975, lambda);
  CHECK(std::abs(static_cast<double>(hi) - (lambda + 1.96 * std::sqrt(lambda))) < 3.0);
}

TEST_CASE("negative binomial quantile") {
  CHECK(negbin_q(0.8, 0.0, 0.6) == 0);
  CHECK(negbin_q(0.5, 2.0, 0.6) == oracle_negbin_q(0.5, 2.0, 0.6));
  CHECK(negbin_q(0.5, 2.0, 1e-6) == poisson_q(0.5, 2.0));
  CHECK_THROWS_AS(negbin_q(0.5, 2.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(negbin_q(0.5, -1.0, 0.6), InvalidArgument);
  for (double mu : {0.1, 2.0, 17.0, 250.0}) {
    for (double alpha : {0.05, 0.6, 3.0}) {
      for (int g = 1; g <= 200; ++g) {
        const double u = (g - 0.5) / 200.0;
        CHECK(negbin_q(u, mu, alpha) == oracle_negbin_q(u, mu, alpha));
      }
    }
  }
}

TEST_CASE("quantiles are monotone in u") {
  std::int64_t pp = 0, pn = 0;
  for (int g = 1; g < 1000; ++g) {
    const double u = g / 1000.0;
    const auto qp = poisson_q(u, 4.2);
    const auto qn = negbin_q(u, 4.2, 0.8);
    CHECK(qp >= pp);
    CHECK(qn >= pn);
    pp = qp;
    pn = qn;
  }
}

TEST_CASE("normal quantile and samples") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  RngStream s(11);
  CHECK(normal_sample(s, 3.0, 0.0) == 3.0);
  CHECK(s.counter() == 1);
  CHECK_THROWS_AS(normal_sample(s, 0.0, -1.0), InvalidArgument);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = normal_sample(s, 0.0, 1.0);
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("beta samples") {
  RngStream s(5);
  auto mean_of = [&](double a, double b) {
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += beta_sample(s, a, b);
    return sum / 100000.0;
  };
  CHECK(std::abs(mean_of(2.0, 50.0) - 2.0 / 52.0) < 0.005);
  CHECK(std::abs(mean_of(2.0, 10.0) - 2.0 / 12.0) < 0.01);
  CHECK_THROWS_AS(beta_sample(s, 0.0, 1.0), InvalidArgument);

  std::vector<double> u(10000);
  for (auto& v : u) v = beta_sample(s, 1.0, 1.0);
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double n = static_cast<double>(u.size());
    ks = std::max({ks, std::abs(u[i] - i / n), std::abs(u[i] - (i + 1) / n)});
  }
  CHECK(ks < 0.02);
}
