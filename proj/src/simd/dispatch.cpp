#include "cann/error.hpp"
#include "cann/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cann::simd {

const KernelTable* avx2_kernels_unchecked();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& pick_default() {
  if (const char* env = std::getenv("CANN_SIMD"); env != nullptr && std::string(env) == "scalar")
    return scalar_kernels();
  if (const KernelTable* t = avx2_kernels())
    return *t;
  return scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&pick_default()};
  return current;
}

} // namespace

const KernelTable* avx2_kernels() {
  static const bool ok = cpu_has_avx2();
  return ok ? avx2_kernels_unchecked() : nullptr;
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (isa == Isa::scalar) {
    slot().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr)
    throw ConfigError("AVX2 kernels requested but not available on this CPU/build");
  slot().store(t, std::memory_order_release);
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar")
    return Isa::scalar;
  if (name == "avx2")
    return Isa::avx2;
  throw ConfigError("unknown SIMD level '" + std::string(name) + "' (expected scalar|avx2)");
}

} // namespace cann::simd
