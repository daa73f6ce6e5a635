#include "jini/crn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "jini/error.hpp"

namespace jini {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t philox64(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t position) {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void require_unit(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw InvalidArgument("uniform must lie in (0,1), got " + std::to_string(u));
  }
}

// Inverts a discrete CDF whose pmf satisfies pmf(k+1) = pmf(k) * ratio(k).
// When pmf(0) is representable the sum runs forward from zero. Otherwise it
// is anchored at the mode (pmf(mode) from log_pmf_mode) and walks outward.
template <class Ratio>
std::int64_t invert_discrete(double u, double log_p0, Ratio ratio,
                             std::int64_t mode, double log_pmf_mode) {
  constexpr double kNegligible = 1e-17;
  if (log_p0 > -700.0) {
    double p = std::exp(log_p0);
    double cdf = p;
    std::int64_t k = 0;
    while (cdf < u) {
      p *= ratio(k);
      ++k;
      cdf += p;
      if (k > mode && p <= kNegligible * cdf) return k;
      if (k > kQuantileCap) {
        throw NumericFailure("discrete quantile exceeded support cap");
      }
    }
    return k;
  }

  // Mode-anchored: cdf(mode) = pmf(mode) * sum_{j<=mode} pmf(j)/pmf(mode).
  if (mode > kQuantileCap) {
    throw NumericFailure("discrete quantile exceeded support cap");
  }
  const double pm = std::exp(log_pmf_mode);
  std::vector<double> below;  // pmf(mode - 1), pmf(mode - 2), ...
  double lower = pm;
  {
    double p = pm;
    for (std::int64_t j = mode; j > 0; --j) {
      p /= ratio(j - 1);
      if (p <= kNegligible * lower) break;
      below.push_back(p);
      lower += p;
    }
  }
  double cdf = lower;
  if (cdf >= u) {
    // walk down: cdf(k-1) = cdf(k) - pmf(k)
    std::int64_t k = mode;
    double pk = pm;
    std::size_t idx = 0;
    while (k > 0) {
      const double prev = cdf - pk;
      if (prev < u) break;
      cdf = prev;
      --k;
      if (idx >= below.size()) break;
      pk = below[idx++];
    }
    return k;
  }
  std::int64_t k = mode;
  double p = pm;
  while (cdf < u) {
    p *= ratio(k);
    ++k;
    cdf += p;
    if (p <= kNegligible * cdf) return k;
    if (k > kQuantileCap) {
      throw NumericFailure("discrete quantile exceeded support cap");
    }
  }
  return k;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ull));
  return s;
}

double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, mix64(stream_ ^ mix64(index)));
}

double RngStream::uniform() { return uniform_at(counter_++); }

double RngStream::uniform_at(std::uint64_t position) const {
  return bits_to_open_unit(philox64(seed_, stream_, position));
}

CrnBank::CrnBank(std::uint64_t seed, std::size_t H, std::size_t n)
    : seed_(seed), H_(H), n_(n) {
  if (H == 0 || n == 0) {
    throw InvalidArgument("CrnBank requires H >= 1 and n >= 1");
  }
  u_.resize(H * n);
  for (std::size_t h = 0; h < H; ++h) {
    const RngStream row_stream(seed, h);
    for (std::size_t i = 0; i < n; ++i) u_[h * n + i] = row_stream.uniform_at(i);
  }
}

std::span<const double> CrnBank::row(std::size_t h) const {
  if (h >= H_) throw InvalidArgument("bank row out of range");
  return {u_.data() + h * n_, n_};
}

CrnBank make_bank(std::uint64_t seed, std::size_t H, std::size_t n) {
  return CrnBank(seed, H, n);
}

int bernoulli_q(double u, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) {
    throw InvalidArgument("bernoulli mean must lie in [0,1]");
  }
  return u < mu ? 1 : 0;
}

std::int64_t poisson_q(double u, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw InvalidArgument("poisson rate must be finite and non-negative");
  }
  require_unit(u);
  if (lambda == 0.0) return 0;
  const auto mode = static_cast<std::int64_t>(std::floor(lambda));
  const double log_pmf_mode = static_cast<double>(mode) * std::log(lambda) - lambda -
                              boost::math::lgamma(static_cast<double>(mode) + 1.0);
  return invert_discrete(
      u, -lambda, [lambda](std::int64_t k) { return lambda / static_cast<double>(k + 1); },
      mode, log_pmf_mode);
}

std::int64_t negbin_q(double u, double mu, double alpha) {
  if (!std::isfinite(mu) || mu < 0.0 || !std::isfinite(alpha) || !(alpha > 0.0)) {
    throw InvalidArgument("negative binomial requires finite mu >= 0 and alpha > 0");
  }
  require_unit(u);
  if (mu == 0.0) return 0;
  const double r = 1.0 / alpha;
  const double p = mu / (r + mu);
  const double log_q = -std::log1p(mu / r);  // log(r / (r + mu))
  const double log_p0 = r * log_q;
  std::int64_t mode = 0;
  if (r > 1.0) mode = static_cast<std::int64_t>(std::floor((r - 1.0) * mu / r));
  const double m = static_cast<double>(mode);
  const double log_pmf_mode = boost::math::lgamma(m + r) - boost::math::lgamma(r) -
                              boost::math::lgamma(m + 1.0) + r * log_q +
                              m * std::log(p);
  return invert_discrete(
      u, log_p0,
      [r, p](std::int64_t k) {
        const double kd = static_cast<double>(k);
        return (kd + r) / (kd + 1.0) * p;
      },
      mode, log_pmf_mode);
}

double normal_quantile(double u) {
  require_unit(u);
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

double beta_sample(RngStream& stream, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw InvalidArgument("beta shapes must be positive");
  }
  const double u = stream.uniform();
  const double x = boost::math::ibeta_inv(a, b, u);
  constexpr double kTiny = std::numeric_limits<double>::min();
  return std::clamp(x, kTiny, std::nextafter(1.0, 0.0));
}

double normal_sample(RngStream& stream, double mean, double sd) {
  if (!(sd >= 0.0)) throw InvalidArgument("normal sd must be non-negative");
  const double u = stream.uniform();
  if (sd == 0.0) return mean;
  return mean + sd * normal_quantile(u);
}

}  // namespace jini
