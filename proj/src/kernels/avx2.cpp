// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// only entered after a runtime CPU check.

#include <immintrin.h>

#include "simd_generic.hpp"
#include "tables.hpp"

namespace feddiv::kernels::detail {
namespace {

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr int W = 4;
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V zero() { return _mm256_setzero_pd(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static T hsum(V v) {
    alignas(32) T lanes[W];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  }
};

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr int W = 8;
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static T hsum(V v) {
    alignas(32) T lanes[W];
    _mm256_store_ps(lanes, v);
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
  }
};

}  // namespace

using simd::make_table;

const KernelTable<double>& avx2_table_f64() {
  static const KernelTable<double> table = make_table<F64>();
  return table;
}

const KernelTable<float>& avx2_table_f32() {
  static const KernelTable<float> table = make_table<F32>();
  return table;
}

}  // namespace feddiv::kernels::detail
