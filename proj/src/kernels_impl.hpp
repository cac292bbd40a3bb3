#pragma once

#include <cstddef>
#include <vector>

#include "dynalloc/kernels.hpp"

namespace dynalloc::kernels {

#define DYNALLOC_DECLARE_KERNELS                                                           \
  double dot(const double* a, const double* b, std::size_t n);                            \
  void axpy(double* y, double alpha, const double* x, std::size_t n);                     \
  void gemv(const double* A, std::size_t rows, std::size_t cols, const double* x,         \
            const double* bias, double* y);                                               \
  void gemv_t_acc(const double* A, std::size_t rows, std::size_t cols, const double* g,   \
                  double* x_grad);                                                        \
  void outer_acc(double* G, std::size_t rows, std::size_t cols, const double* g,          \
                 const double* x);                                                        \
  double quad_form(const double* S, const double* w, std::size_t n);                      \
  void centered_crossprod(const double* X, std::size_t rows, std::size_t n,               \
                          const double* mean, double* C);

namespace scalar {
DYNALLOC_DECLARE_KERNELS
}
namespace avx2 {
DYNALLOC_DECLARE_KERNELS
const KernelTable& table() noexcept;
}
namespace neon {
DYNALLOC_DECLARE_KERNELS
const KernelTable& table() noexcept;
}

#undef DYNALLOC_DECLARE_KERNELS

}  // namespace dynalloc::kernels
