#pragma once

// Deterministic random numbers: a counter-based generator (Philox4x32-10),
// the common-random-numbers bank reused across every IB iteration, and the
// inverse-CDF samplers used to turn bank uniforms into responses.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace jini {

/// Philox4x32-10 block function. Pure: (counter, key) -> 4 random words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive seeds and substream ids.
std::uint64_t mix64(std::uint64_t x);

/// Combine a master seed with a path of indices into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path);

/// Maps 64 random bits to a double strictly inside (0,1).
double bits_to_open_unit(std::uint64_t bits);

/// A single-owner stream of uniforms. Draw j of stream s under seed k is
/// philox(ctr = (j, s), key = k), so any draw is addressable without
/// generating its predecessors.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  /// Independent stream addressed by (this stream, index).
  RngStream substream(std::uint64_t index) const;

  /// Next uniform in (0,1); advances the counter.
  double uniform();

  /// Uniform at an absolute counter position; does not touch the state.
  double uniform_at(std::uint64_t position) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// H x n matrix of uniforms, fixed for a whole IB run. Row h is stream h of
/// the bank seed, entry i is its i-th draw, so (seed, h, i) addresses u
/// directly and the bank is bit-identical for identical (seed, H, n).
class CrnBank {
 public:
  CrnBank(std::uint64_t seed, std::size_t H, std::size_t n);

  std::size_t H() const noexcept { return H_; }
  std::size_t n() const noexcept { return n_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> row(std::size_t h) const;
  double operator()(std::size_t h, std::size_t i) const { return u_[h * n_ + i]; }

  bool operator==(const CrnBank& other) const = default;

 private:
  std::uint64_t seed_;
  std::size_t H_;
  std::size_t n_;
  std::vector<double> u_;
};

CrnBank make_bank(std::uint64_t seed, std::size_t H, std::size_t n);

/// Largest k explored by the discrete quantile functions.
inline constexpr std::int64_t kQuantileCap = 10'000'000;

/// 1 iff u < mu.
int bernoulli_q(double u, double mu);

/// Smallest k with P(Y <= k) >= u for Y ~ Poisson(lambda).
std::int64_t poisson_q(double u, double lambda);

/// Smallest k with P(Y <= k) >= u for the negative binomial with mean mu and
/// variance mu + alpha mu^2.
std::int64_t negbin_q(double u, double mu, double alpha);

/// Standard normal quantile.
double normal_quantile(double u);

/// Beta(a, b) draw by inversion of one uniform from the stream.
double beta_sample(RngStream& stream, double a, double b);

/// N(mean, sd^2) draw by inversion of one uniform. sd == 0 returns mean
/// exactly (the uniform is still consumed).
double normal_sample(RngStream& stream, double mean, double sd);

}  // namespace jini
