#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "feddiv/kernels/kernels.hpp"
#include "feddiv/rng.hpp"

namespace feddiv::kernels {
namespace {

template <typename T>
std::vector<T> random_vector(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <typename T>
double tolerance();
template <>
double tolerance<double>() { return 1e-12; }
template <>
double tolerance<float>() { return 2e-5; }

template <typename T>
void expect_close(const std::vector<T>& a, const std::vector<T>& b, double scale) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    ASSERT_NEAR(a[i], b[i], tolerance<T>() * scale) << "index " << i;
}

std::vector<Backend> vector_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::avx2, Backend::neon})
    if (backend_supported(b)) out.push_back(b);
  return out;
}

template <typename T>
class KernelEquivalence : public ::testing::Test {};

using Precisions = ::testing::Types<double, float>;
TYPED_TEST_SUITE(KernelEquivalence, Precisions);

// Sizes straddle the 4-row / 2W-column blocking and all tail paths.
const int kSizes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 3}, {5, 17, 9}, {8, 16, 72},
                         {13, 31, 29}, {16, 256, 144}, {7, 3, 100}, {2, 40, 1}};

TYPED_TEST(KernelEquivalence, GemmVariantsMatchScalarReference) {
  using T = TypeParam;
  Rng rng(11);
  const auto& ref = table<T>(Backend::scalar);
  for (Backend backend : vector_backends()) {
    const auto& simd = table<T>(backend);
    for (const auto& s : kSizes) {
      const int m = s[0], n = s[1], k = s[2];
      const auto c0 = random_vector<T>(static_cast<std::size_t>(m) * n, rng);
      const double scale = 1.0 + k;
      {
        const auto a = random_vector<T>(static_cast<std::size_t>(m) * k, rng);
        const auto b = random_vector<T>(static_cast<std::size_t>(k) * n, rng);
        auto c_ref = c0, c_simd = c0;
        ref.gemm_nn(m, n, k, a.data(), b.data(), c_ref.data());
        simd.gemm_nn(m, n, k, a.data(), b.data(), c_simd.data());
        expect_close(c_ref, c_simd, scale);
      }
      {
        const auto a = random_vector<T>(static_cast<std::size_t>(m) * k, rng);
        const auto b = random_vector<T>(static_cast<std::size_t>(n) * k, rng);
        auto c_ref = c0, c_simd = c0;
        ref.gemm_nt(m, n, k, a.data(), b.data(), c_ref.data());
        simd.gemm_nt(m, n, k, a.data(), b.data(), c_simd.data());
        expect_close(c_ref, c_simd, scale);
      }
      {
        const auto a = random_vector<T>(static_cast<std::size_t>(k) * m, rng);
        const auto b = random_vector<T>(static_cast<std::size_t>(k) * n, rng);
        auto c_ref = c0, c_simd = c0;
        ref.gemm_tn(m, n, k, a.data(), b.data(), c_ref.data());
        simd.gemm_tn(m, n, k, a.data(), b.data(), c_simd.data());
        expect_close(c_ref, c_simd, scale);
      }
    }
  }
}

TYPED_TEST(KernelEquivalence, VectorKernelsMatchScalarReference) {
  using T = TypeParam;
  Rng rng(12);
  const auto& ref = table<T>(Backend::scalar);
  for (Backend backend : vector_backends()) {
    const auto& simd = table<T>(backend);
    for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 15u, 16u, 17u, 100u, 1027u}) {
      const auto x = random_vector<T>(n, rng);
      const auto y0 = random_vector<T>(n, rng);
      auto y_ref = y0, y_simd = y0;
      ref.axpy(n, T(0.37), x.data(), y_ref.data());
      simd.axpy(n, T(0.37), x.data(), y_simd.data());
      expect_close(y_ref, y_simd, 1.0);
      EXPECT_NEAR(ref.dot(n, x.data(), y0.data()), simd.dot(n, x.data(), y0.data()),
                  tolerance<T>() * (1.0 + n));
      EXPECT_NEAR(ref.sum(n, x.data()), simd.sum(n, x.data()), tolerance<T>() * (1.0 + n));
    }
  }
}

TEST(KernelDispatch, ScalarAlwaysAvailableAndNamesRoundTrip) {
  EXPECT_TRUE(backend_supported(Backend::scalar));
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
    EXPECT_EQ(parse_backend(backend_name(b)), b);
  EXPECT_THROW(parse_backend("sse9"), std::invalid_argument);
}

TEST(KernelDispatch, SetBackendSwitchesActiveTable) {
  const Backend saved = active_backend();
  set_backend(Backend::scalar);
  EXPECT_EQ(active_backend(), Backend::scalar);
  EXPECT_EQ(&active<double>(), &table<double>(Backend::scalar));
  for (Backend b : {Backend::avx2, Backend::neon}) {
    if (backend_supported(b)) {
      set_backend(b);
      EXPECT_EQ(active_backend(), b);
    } else {
      EXPECT_THROW(set_backend(b), std::invalid_argument);
    }
  }
  set_backend(saved);
}

TEST(KernelDispatch, RepeatedCallsAreBitIdentical) {
  Rng rng(3);
  const auto a = random_vector<double>(13 * 29, rng);
  const auto b = random_vector<double>(29 * 31, rng);
  std::vector<double> c1(13 * 31, 0.0), c2(13 * 31, 0.0);
  gemm_nn<double>(13, 31, 29, a.data(), b.data(), c1.data());
  gemm_nn<double>(13, 31, 29, a.data(), b.data(), c2.data());
  EXPECT_EQ(c1, c2);
}

}  // namespace
}  // namespace feddiv::kernels
