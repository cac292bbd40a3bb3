// AArch64 only; Advanced SIMD is part of the base ISA there.
#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace dynalloc::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot(A + r * cols, x, cols) + (bias ? bias[r] : 0.0);
  }
}

void gemv_t_acc(const double* A, std::size_t rows, std::size_t cols, const double* g,
                double* x_grad) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x_grad, g[r], A + r * cols, cols);
}

void outer_acc(double* G, std::size_t rows, std::size_t cols, const double* g,
               const double* x) {
  for (std::size_t r = 0; r < rows; ++r) axpy(G + r * cols, g[r], x, cols);
}

double quad_form(const double* S, const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * dot(S + i * n, w, n);
  return s;
}

void centered_crossprod(const double* X, std::size_t rows, std::size_t n, const double* mean,
                        double* C) {
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < n; ++i) centered[i] = X[t * n + i] - mean[i];
    for (std::size_t r = 0; r < n; ++r) axpy(C + r * n, centered[r], centered.data(), n);
  }
}

const KernelTable& table() noexcept {
  static const KernelTable t{Backend::neon, dot,       axpy,      gemv,
                             gemv_t_acc,    outer_acc, quad_form, centered_crossprod};
  return t;
}

}  // namespace dynalloc::kernels::neon
