#pragma once

#include <cstddef>
#include <cstdint>

namespace cryptovit::kernels {

enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);
const char* backend_name(Backend b);
const char* active_backend_name();

// Hot loops, dispatched at runtime. The AVX2 variants are written to be
// bit-identical to the scalar references: integer kernels are exact by
// construction, and matmul_f32 keeps the scalar per-element operation
// order (k-sequential multiply-add, no FMA; the kernel TUs are compiled
// with -ffp-contract=off). Equivalence is asserted in tests/unit.

// c = a(m x k) * b(k x n), row-major; accumulates into c when requested.
void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n,
                bool accumulate = false);

// dst[i] = src[i] ^ mask[i]
void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n);

uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n);

namespace scalar {
void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n);
uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
#define CRYPTOVIT_HAVE_AVX2_BUILD 1
namespace avx2 {
void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n);
uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n);
}  // namespace avx2
#endif

// Generic reference used by the double-precision gradient-check path; the
// float specialization routes through the dispatched kernel.
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    const T* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      T av = arow[kk];
      const T* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <>
inline void matmul<float>(const float* a, const float* b, float* c, int m, int k, int n,
                          bool accumulate) {
  matmul_f32(a, b, c, m, k, n, accumulate);
}

}  // namespace cryptovit::kernels
