// AVX2 variants. matmul_f32 broadcasts a[i][k] and streams 8 columns of c
// at a time, so every c element sees the same k-sequential multiply-add
// sequence as the scalar reference (this TU is built with
// -ffp-contract=off, so no FMA contraction sneaks in). Integer kernels are
// exact in any order.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include "cryptovit/kernels.hpp"

namespace cryptovit::kernels::avx2 {

void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) {
      int j = 0;
      for (; j < n8; j += 8) _mm256_storeu_ps(crow + j, _mm256_setzero_ps());
      for (; j < n; ++j) crow[j] = 0.0f;
    }
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const __m256 va = _mm256_set1_ps(av);
      const float* brow = b + static_cast<size_t>(kk) * n;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 acc = _mm256_loadu_ps(crow + j);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(va, _mm256_loadu_ps(brow + j)));
        _mm256_storeu_ps(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void xor_bytes(const uint8_t* src, const uint8_t* mask, uint8_t* dst, size_t n) {
  size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    __m256i m = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(mask + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_xor_si256(s, m));
  }
  for (; i < n; ++i) dst[i] = src[i] ^ mask[i];
}

uint64_t sum_abs_diff(const uint8_t* a, const uint8_t* b, size_t n) {
  __m256i acc = _mm256_setzero_si256();
  size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(va, vb));
  }
  alignas(32) uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    total += static_cast<uint64_t>(d < 0 ? -d : d);
  }
  return total;
}

uint64_t sum_sq_diff(const uint8_t* a, const uint8_t* b, size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  __m256i acc = _mm256_setzero_si256();
  size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    // |a-b| as unsigned bytes, widened to 16 bit, squared and pair-summed
    __m256i d = _mm256_sub_epi8(_mm256_max_epu8(va, vb), _mm256_min_epu8(va, vb));
    __m256i lo = _mm256_unpacklo_epi8(d, zero);
    __m256i hi = _mm256_unpackhi_epi8(d, zero);
    __m256i sq = _mm256_add_epi32(_mm256_madd_epi16(lo, lo), _mm256_madd_epi16(hi, hi));
    // widen the eight i32 partials to i64 before accumulating
    __m256i sq_lo = _mm256_cvtepu32_epi64(_mm256_castsi256_si128(sq));
    __m256i sq_hi = _mm256_cvtepu32_epi64(_mm256_extracti128_si256(sq, 1));
    acc = _mm256_add_epi64(acc, _mm256_add_epi64(sq_lo, sq_hi));
  }
  alignas(32) uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    total += static_cast<uint64_t>(d * d);
  }
  return total;
}

}  // namespace cryptovit::kernels::avx2

#endif  // x86
