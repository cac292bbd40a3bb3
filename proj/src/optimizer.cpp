#include "dynalloc/optimizer.hpp"

#include <cmath>

#include "dynalloc/error.hpp"

namespace dynalloc::policy {

void sgd_step(MlpParams& params, const MlpParams& grad, double alpha, Direction dir) {
  if (!(alpha > 0.0)) throw Error("learning rate must be positive");
  add_scaled(params, grad, dir == Direction::ascend ? alpha : -alpha);
}

Adam::Adam(const MlpParams& shape, AdamConfig cfg)
    : cfg_(cfg), m_(shape.num_params(), 0.0), v_(shape.num_params(), 0.0) {
  if (!(cfg_.lr > 0.0)) throw Error("learning rate must be positive");
}

void Adam::step(MlpParams& params, const MlpParams& grad, Direction dir) {
  Vector theta = params.flatten();
  const Vector g = grad.flatten();
  if (theta.size() != m_.size() || g.size() != m_.size()) throw Error("parameter shape mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double sign = dir == Direction::ascend ? 1.0 : -1.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    theta[i] += sign * cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
  params.assign_flat(theta);
}

}  // namespace dynalloc::policy
