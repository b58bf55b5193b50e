// Reference kernels. The AVX2 variants must reproduce these bit-for-bit;
// keep the per-element operation order (k-sequential multiply-add) intact.

#include "cryptovit/kernels.hpp"

namespace cryptovit::kernels::scalar {

void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    }
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] = src[i] ^ mask[i];
}

uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n) {
  uint64_t acc = 0;
  for (size_t i = 0; i < n; ++i) {
    int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    acc += static_cast<uint64_t>(d < 0 ? -d : d);
  }
  return acc;
}

uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n) {
  uint64_t acc = 0;
  for (size_t i = 0; i < n; ++i) {
    int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    acc += static_cast<uint64_t>(d * d);
  }
  return acc;
}

}  // namespace cryptovit::kernels::scalar
