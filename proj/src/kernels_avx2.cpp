// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace dynalloc::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
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
  // w^T (S w); the row dot already covers the diagonal and off-diagonal terms.
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * dot(S + i * n, w, n);
  return s;
}

void centered_crossprod(const double* X, std::size_t rows, std::size_t n, const double* mean,
                        double* C) {
  std::vector<double> centered(n);
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = X + t * n;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      _mm256_storeu_pd(centered.data() + i,
                       _mm256_sub_pd(_mm256_loadu_pd(xt + i), _mm256_loadu_pd(mean + i)));
    }
    for (; i < n; ++i) centered[i] = xt[i] - mean[i];
    for (std::size_t r = 0; r < n; ++r) axpy(C + r * n, centered[r], centered.data(), n);
  }
}

const KernelTable& table() noexcept {
  static const KernelTable t{Backend::avx2, dot,       axpy,      gemv,
                             gemv_t_acc,    outer_acc, quad_form, centered_crossprod};
  return t;
}

}  // namespace dynalloc::kernels::avx2
