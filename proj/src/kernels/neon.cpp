// NEON kernels for AArch64. NEON is architecturally guaranteed there, so the
// runtime check is trivially true.

#include <arm_neon.h>

#include "simd_generic.hpp"
#include "tables.hpp"

namespace feddiv::kernels::detail {
namespace {

struct F64 {
  using T = double;
  using V = float64x2_t;
  static constexpr int W = 2;
  static V load(const T* p) { return vld1q_f64(p); }
  static void store(T* p, V v) { vst1q_f64(p, v); }
  static V set1(T x) { return vdupq_n_f64(x); }
  static V zero() { return vdupq_n_f64(0.0); }
  static V fmadd(V a, V b, V c) { return vfmaq_f64(c, a, b); }
  static V add(V a, V b) { return vaddq_f64(a, b); }
  static T hsum(V v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }
};

struct F32 {
  using T = float;
  using V = float32x4_t;
  static constexpr int W = 4;
  static V load(const T* p) { return vld1q_f32(p); }
  static void store(T* p, V v) { vst1q_f32(p, v); }
  static V set1(T x) { return vdupq_n_f32(x); }
  static V zero() { return vdupq_n_f32(0.0f); }
  static V fmadd(V a, V b, V c) { return vfmaq_f32(c, a, b); }
  static V add(V a, V b) { return vaddq_f32(a, b); }
  static T hsum(V v) {
    return (vgetq_lane_f32(v, 0) + vgetq_lane_f32(v, 1)) +
           (vgetq_lane_f32(v, 2) + vgetq_lane_f32(v, 3));
  }
};

}  // namespace

using simd::make_table;

const KernelTable<double>& neon_table_f64() {
  static const KernelTable<double> table = make_table<F64>();
  return table;
}

const KernelTable<float>& neon_table_f32() {
  static const KernelTable<float> table = make_table<F32>();
  return table;
}

}  // namespace feddiv::kernels::detail
