#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "cryptovit/kernels.hpp"

using namespace cryptovit;

namespace {

struct BackendGuard {
  kernels::Backend saved;
  BackendGuard() : saved(kernels::active_backend()) {}
  ~BackendGuard() { kernels::set_backend(saved); }
};

std::vector<float> random_floats(size_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<uint8_t> random_bytes(size_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<uint8_t> v(n);
  for (auto& x : v) x = static_cast<uint8_t>(rng());
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar matmul matches a naive reference") {
  const int m = 5, k = 7, n = 9;
  auto a = random_floats(m * k, 1);
  auto b = random_floats(k * n, 2);
  std::vector<float> c(m * n, 0.0f);
  kernels::scalar::matmul_f32(a.data(), b.data(), c.data(), m, k, n, false);

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      float want = 0.0f;
      for (int kk = 0; kk < k; ++kk) want += a[i * k + kk] * b[kk * n + j];
      CHECK(c[i * n + j] == doctest::Approx(want).epsilon(1e-5));
    }
  }
}

TEST_CASE("matmul accumulate flag adds into the output") {
  const int m = 3, k = 4, n = 5;
  auto a = random_floats(m * k, 3);
  auto b = random_floats(k * n, 4);
  std::vector<float> base = random_floats(m * n, 5);
  std::vector<float> c1 = base;
  kernels::scalar::matmul_f32(a.data(), b.data(), c1.data(), m, k, n, true);
  std::vector<float> prod(m * n, 0.0f);
  kernels::scalar::matmul_f32(a.data(), b.data(), prod.data(), m, k, n, false);
  for (size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(base[i] + prod[i]));
}

#if defined(CRYPTOVIT_HAVE_AVX2_BUILD)
TEST_CASE("avx2 kernels are bit-identical to the scalar references") {
  if (!kernels::avx2_supported()) return;  // nothing to compare on this CPU

  // ragged sizes on purpose: remainders must agree too
  for (uint32_t seed = 0; seed < 6; ++seed) {
    const int m = 1 + static_cast<int>(seed * 3) % 7;
    const int k = 1 + static_cast<int>(seed * 5 + 2) % 33;
    const int n = 1 + static_cast<int>(seed * 11 + 4) % 41;
    auto a = random_floats(static_cast<size_t>(m) * k, 100 + seed);
    auto b = random_floats(static_cast<size_t>(k) * n, 200 + seed);
    std::vector<float> cs(static_cast<size_t>(m) * n), cv(static_cast<size_t>(m) * n);
    kernels::scalar::matmul_f32(a.data(), b.data(), cs.data(), m, k, n, false);
    kernels::avx2::matmul_f32(a.data(), b.data(), cv.data(), m, k, n, false);
    CHECK(std::memcmp(cs.data(), cv.data(), cs.size() * sizeof(float)) == 0);
  }

  for (size_t n : {1u, 31u, 32u, 33u, 1000u, 4097u}) {
    auto x = random_bytes(n, 7);
    auto mask = random_bytes(n, 8);
    std::vector<uint8_t> ds(n), dv(n);
    kernels::scalar::xor_bytes(x.data(), mask.data(), ds.data(), n);
    kernels::avx2::xor_bytes(x.data(), mask.data(), dv.data(), n);
    CHECK(ds == dv);

    auto y = random_bytes(n, 9);
    CHECK(kernels::scalar::sum_abs_diff(x.data(), y.data(), n) ==
          kernels::avx2::sum_abs_diff(x.data(), y.data(), n));
    CHECK(kernels::scalar::sum_sq_diff(x.data(), y.data(), n) ==
          kernels::avx2::sum_sq_diff(x.data(), y.data(), n));
  }
}
#endif

TEST_CASE("backend selection is sticky and reversible") {
  BackendGuard guard;
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  CHECK(std::string(kernels::active_backend_name()) == "scalar");
  if (kernels::avx2_supported()) {
    kernels::set_backend(kernels::Backend::avx2);
    CHECK(std::string(kernels::active_backend_name()) == "avx2");
  }
}

TEST_CASE("dispatched byte kernels work at any alignment offset") {
  auto x = random_bytes(1024, 11);
  auto mask = random_bytes(1024, 12);
  for (size_t off : {0u, 1u, 3u, 17u}) {
    std::vector<uint8_t> out(1024 - off);
    kernels::xor_bytes(x.data() + off, mask.data() + off, out.data(), out.size());
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == (x[off + i] ^ mask[off + i]));
  }
}

}  // TEST_SUITE
