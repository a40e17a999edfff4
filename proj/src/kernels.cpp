#include "cachelab/kernels.hpp"

#include <cstring>
#include <stdexcept>

namespace cachelab::kernels {

namespace {

constexpr Dispatch kScalarTable{
    scalar::dot,  scalar::axpy,
    scalar::hadamard, scalar::gemv,
    scalar::gemv_transposed_acc, scalar::ger_acc,
    "scalar"};

#if defined(__x86_64__)
constexpr Dispatch kAvx2Table{
    avx2::dot,  avx2::axpy,
    avx2::hadamard, avx2::gemv,
    avx2::gemv_transposed_acc, avx2::ger_acc,
    "avx2"};
#endif

const Dispatch& detect() {
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return kAvx2Table;
  }
#endif
  return kScalarTable;
}

const Dispatch* g_active = nullptr;

}  // namespace

const Dispatch& active() {
  if (!g_active) g_active = &detect();
  return *g_active;
}

void force_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_active = &kScalarTable;
    return;
  }
#if defined(__x86_64__)
  if (std::strcmp(name, "avx2") == 0) {
    if (!__builtin_cpu_supports("avx2")) {
      throw std::runtime_error("avx2 backend not supported on this CPU");
    }
    g_active = &kAvx2Table;
    return;
  }
#endif
  throw std::invalid_argument("unknown kernel backend");
}

}  // namespace cachelab::kernels
