#pragma once

// Data-parallel inner loops shared by the analytics, network and
// environment code. Each routine has a scalar reference implementation and,
// where the host supports it, a vectorized variant. The active table is
// chosen once at startup from CPU feature detection and can be overridden
// (tests do this to check equivalence).

#include <cstddef>
#include <span>
#include <string_view>

namespace dynalloc::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  Backend backend;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // y = A x + bias, A is rows x cols row-major; bias may be null
  void (*gemv)(const double* A, std::size_t rows, std::size_t cols, const double* x,
               const double* bias, double* y);
  // x_grad += A^T g
  void (*gemv_t_acc)(const double* A, std::size_t rows, std::size_t cols, const double* g,
                     double* x_grad);
  // G += g x^T
  void (*outer_acc)(double* G, std::size_t rows, std::size_t cols, const double* g,
                    const double* x);
  // sum_ij w_i w_j S_ij, S is n x n row-major
  double (*quad_form)(const double* S, const double* w, std::size_t n);
  // C += sum_t (X_t - mean)(X_t - mean)^T over rows of X (rows x n); C is n x n.
  void (*centered_crossprod)(const double* X, std::size_t rows, std::size_t n,
                             const double* mean, double* C);
};

const KernelTable& scalar_table() noexcept;
/// Null when the build or host lacks the instruction set.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

/// The table in use. Defaults to the best supported backend; the
/// DYNALLOC_KERNELS environment variable ("scalar", "avx2", "neon") pins it.
const KernelTable& active() noexcept;

/// Pins the active backend; returns false (and changes nothing) if the
/// backend is unavailable on this host.
bool set_backend(Backend b) noexcept;
Backend best_available() noexcept;
std::string_view backend_name(Backend b) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(std::span<double> y, double alpha, std::span<const double> x) noexcept {
  active().axpy(y.data(), alpha, x.data(), y.size());
}

}  // namespace dynalloc::kernels
