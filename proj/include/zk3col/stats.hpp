#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "zk3col/error.hpp"

namespace zk3col::stats {

namespace detail {

// Series for P(a, x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < 10'000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10'000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw Error(ErrorCode::invalid_argument, "gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return std::clamp(1.0 - detail::gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(detail::gamma_q_fraction(a, x), 0.0, 1.0);
}

// Survival function of the chi-square distribution.
inline double chi2_sf(double stat, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::invalid_argument, "chi2_sf: df must be positive");
  if (stat <= 0.0) return 1.0;
  return gamma_q(df / 2.0, stat / 2.0);
}

struct ChiSquare {
  double stat = 0.0;
  double df = 0.0;
  double p = 1.0;
};

inline ChiSquare pearson(std::span<const double> observed, std::span<const double> expected) {
  ChiSquare r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    r.stat += d * d / expected[i];
  }
  r.df = static_cast<double>(observed.size()) - 1.0;
  r.p = chi2_sf(r.stat, r.df);
  return r;
}

// Kolmogorov limiting distribution, P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

// One-sample KS test against Uniform(0,1), with Stephens' small-sample
// correction to the asymptotic p-value.
inline KsResult ks_uniform(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "ks_uniform: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = std::clamp(samples[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - x, x - i / n});
  }
  const double sqn = std::sqrt(n);
  return {d, kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d)};
}

inline double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h;
}

// Jensen-Shannon divergence, base 2, in [0, 1].
inline double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::invalid_argument, "jsd: length mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) out += 0.5 * p[i] * std::log2(p[i] / mid);
    if (q[i] > 0.0) out += 0.5 * q[i] * std::log2(q[i] / mid);
  }
  return std::clamp(out, 0.0, 1.0);
}

inline std::optional<double> pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace zk3col::stats
