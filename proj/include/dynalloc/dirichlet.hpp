#pragma once

#include <random>
#include <span>

#include "dynalloc/linalg.hpp"

namespace dynalloc::rl {

/// softplus(x) + 1, so every concentration exceeds one.
Vector concentration_from_logits(std::span<const double> logits);
/// d concentration_i / d logit_i (the logistic function).
Vector concentration_slope(std::span<const double> logits);

double dirichlet_log_density(std::span<const double> alpha, std::span<const double> x);
/// d log p(x | alpha) / d alpha_i = digamma(sum alpha) - digamma(alpha_i) + ln x_i.
Vector dirichlet_log_density_grad(std::span<const double> alpha, std::span<const double> x);
Vector dirichlet_mean(std::span<const double> alpha);
/// A draw with every component strictly positive.
Vector dirichlet_sample(std::span<const double> alpha, std::mt19937_64& rng);

}  // namespace dynalloc::rl
