#include "cryptovit/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "cryptovit/common.hpp"

namespace cryptovit::kernels {

bool avx2_supported() {
#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend pick_default() {
  if (const char* env = std::getenv("CRYPTOVIT_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_supported()) fail(Errc::config, "CRYPTOVIT_KERNELS=avx2 but CPU lacks AVX2");
      return Backend::avx2;
    }
    fail(Errc::config, std::string("unknown CRYPTOVIT_KERNELS value: ") + env);
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& state() {
  static Backend b = pick_default();
  return b;
}

}  // namespace

Backend active_backend() { return state(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) fail(Errc::config, "AVX2 not supported on this CPU");
  state() = b;
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

const char* active_backend_name() { return backend_name(active_backend()); }

void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
  if (active_backend() == Backend::avx2) {
    avx2::matmul_f32(a, b, c, m, k, n, accumulate);
    return;
  }
#endif
  scalar::matmul_f32(a, b, c, m, k, n, accumulate);
}

void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n) {
#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
  if (active_backend() == Backend::avx2) {
    avx2::xor_bytes(src, mask, dst, n);
    return;
  }
#endif
  scalar::xor_bytes(src, mask, dst, n);
}

uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n) {
#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
  if (active_backend() == Backend::avx2) return avx2::sum_abs_diff(a, b, n);
#endif
  return scalar::sum_abs_diff(a, b, n);
}

uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n) {
#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
  if (active_backend() == Backend::avx2) return avx2::sum_sq_diff(a, b, n);
#endif
  return scalar::sum_sq_diff(a, b, n);
}

}  // namespace cryptovit::kernels
