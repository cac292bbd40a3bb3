#include "dynalloc/dirichlet.hpp"

#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include "dynalloc/error.hpp"

namespace dynalloc::rl {

Vector concentration_from_logits(std::span<const double> logits) {
  Vector alpha(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    alpha[i] = softplus + 1.0;
  }
  return alpha;
}

Vector concentration_slope(std::span<const double> logits) {
  Vector s(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    s[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return s;
}

double dirichlet_log_density(std::span<const double> alpha, std::span<const double> x) {
  if (alpha.size() != x.size()) throw Error("Dirichlet dimension mismatch");
  double a0 = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) throw Error("Dirichlet concentration must be positive");
    if (!(x[i] > 0.0)) throw Error("Dirichlet support excludes zero components");
    a0 += alpha[i];
    s += (alpha[i] - 1.0) * std::log(x[i]) - std::lgamma(alpha[i]);
  }
  return s + std::lgamma(a0);
}

Vector dirichlet_log_density_grad(std::span<const double> alpha, std::span<const double> x) {
  if (alpha.size() != x.size()) throw Error("Dirichlet dimension mismatch");
  double a0 = 0.0;
  for (double a : alpha) a0 += a;
  const double psi0 = boost::math::digamma(a0);
  Vector g(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    g[i] = psi0 - boost::math::digamma(alpha[i]) + std::log(x[i]);
  }
  return g;
}

Vector dirichlet_mean(std::span<const double> alpha) {
  double a0 = 0.0;
  for (double a : alpha) a0 += a;
  Vector m(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) m[i] = alpha[i] / a0;
  return m;
}

Vector dirichlet_sample(std::span<const double> alpha, std::mt19937_64& rng) {
  Vector x(alpha.size());
  while (true) {
    double sum = 0.0;
    bool positive = true;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      std::gamma_distribution<double> g(alpha[i], 1.0);
      x[i] = g(rng);
      positive = positive && x[i] > 0.0;
      sum += x[i];
    }
    if (!positive || !(sum > 0.0) || !std::isfinite(sum)) continue;
    for (double& v : x) v /= sum;
    bool interior = true;
    for (double v : x) interior = interior && v > 0.0 && v < 1.0;
    if (interior || x.size() == 1) return x;
  }
}

}  // namespace dynalloc::rl
