#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lsi::numerics {

/// e^{-z} I_n(z) for integer n and z >= 0, summed in log space around the
/// peak term so that large z does not overflow.
inline double scaled_bessel_i(int n, double z) {
  if (z < 0.0) {
    throw std::invalid_argument("scaled_bessel_i: negative argument");
  }
  n = std::abs(n);
  if (z == 0.0) {
    return n == 0 ? 1.0 : 0.0;
  }
  const double half = 0.5 * z;
  const double log_half = std::log(half);
  auto log_term = [&](double k) {
    return (2.0 * k + n) * log_half - std::lgamma(k + 1.0) - std::lgamma(k + n + 1.0) - z;
  };
  const double peak = 0.5 * (std::sqrt(static_cast<double>(n) * n + z * z) - n);
  const long k0 = static_cast<long>(std::floor(peak));
  const double t0 = std::exp(log_term(static_cast<double>(k0)));
  if (t0 == 0.0) {
    return 0.0;
  }
  double sum = t0;
  double term = t0;
  for (long k = k0;; ++k) {
    term *= half * half / ((k + 1.0) * (k + 1.0 + n));
    sum += term;
    if (term < 1e-18 * sum) {
      break;
    }
  }
  term = t0;
  for (long k = k0; k > 0; --k) {
    term *= k * (k + static_cast<double>(n)) / (half * half);
    sum += term;
    if (term < 1e-18 * sum) {
      break;
    }
  }
  return sum;
}

}  // namespace lsi::numerics
