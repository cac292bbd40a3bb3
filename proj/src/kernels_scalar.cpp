#include "kernels_impl.hpp"

namespace dynalloc::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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
  // Diagonal and off-diagonal sums kept separately, as in the textbook
  // two-term expression for portfolio variance.
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag += w[i] * w[i] * S[i * n + i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) off += w[i] * w[j] * S[i * n + j];
    }
  }
  return diag + off;
}

void centered_crossprod(const double* X, std::size_t rows, std::size_t n, const double* mean,
                        double* C) {
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < n; ++i) centered[i] = X[t * n + i] - mean[i];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += centered[i] * centered[j];
    }
  }
}

}  // namespace dynalloc::kernels::scalar

namespace dynalloc::kernels {

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Backend::scalar,        scalar::dot,       scalar::axpy,
                                 scalar::gemv,           scalar::gemv_t_acc, scalar::outer_acc,
                                 scalar::quad_form,      scalar::centered_crossprod};
  return table;
}

}  // namespace dynalloc::kernels
