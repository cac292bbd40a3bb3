#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace dynalloc::kernels {

namespace {

bool host_has_avx2() noexcept {
#if defined(DYNALLOC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return &scalar_table();
    case Backend::avx2: return avx2_table();
    case Backend::neon: return neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("DYNALLOC_KERNELS")) {
    const std::string_view name{env};
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (name == backend_name(b)) {
        if (const KernelTable* t = table_for(b)) return t;
      }
    }
  }
  return table_for(best_available());
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> ptr{initial_table()};
  return ptr;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if defined(DYNALLOC_HAVE_AVX2)
  static const bool ok = host_has_avx2();
  return ok ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(DYNALLOC_HAVE_NEON)
  return &neon::table();
#else
  return nullptr;
#endif
}

Backend best_available() noexcept {
  if (avx2_table()) return Backend::avx2;
  if (neon_table()) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) noexcept {
  const KernelTable* t = table_for(b);
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

}  // namespace dynalloc::kernels
