#pragma once

// Width-generic blocked kernels. Each SIMD translation unit includes this with
// its own lane traits type S providing T, V, W, load, store, set1, zero, fmadd,
// add and hsum. Traits types must live in an unnamed namespace so that each
// instantiation stays local to the translation unit compiled with the
// matching target flags.

#include <cmath>
#include <cstddef>

#include "feddiv/kernels/kernels.hpp"

namespace feddiv::kernels::detail::simd {

// C[m x n] += sum_p A(i, p) * B[p, :], where A(i, p) = a[i * ars + p * aps].
// Covers both A*B (ars = k, aps = 1) and A^T*B (ars = 1, aps = m).
template <typename S>
void gemm_strided_a(int m, int n, int k, const typename S::T* a, std::size_t ars,
                    std::size_t aps, const typename S::T* b, typename S::T* c) {
  using T = typename S::T;
  using V = typename S::V;
  constexpr int W = S::W;
  const std::size_t ldb = static_cast<std::size_t>(n);
  const std::size_t ldc = static_cast<std::size_t>(n);

  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + static_cast<std::size_t>(i) * ars;
    const T* a1 = a0 + ars;
    const T* a2 = a1 + ars;
    const T* a3 = a2 + ars;
    T* c0 = c + static_cast<std::size_t>(i) * ldc;
    T* c1 = c0 + ldc;
    T* c2 = c1 + ldc;
    T* c3 = c2 + ldc;
    int j = 0;
    for (; j + 2 * W <= n; j += 2 * W) {
      V r00 = S::load(c0 + j), r01 = S::load(c0 + j + W);
      V r10 = S::load(c1 + j), r11 = S::load(c1 + j + W);
      V r20 = S::load(c2 + j), r21 = S::load(c2 + j + W);
      V r30 = S::load(c3 + j), r31 = S::load(c3 + j + W);
      const T* bp = b + j;
      for (int p = 0; p < k; ++p, bp += ldb) {
        const std::size_t off = static_cast<std::size_t>(p) * aps;
        const V b0 = S::load(bp);
        const V b1 = S::load(bp + W);
        V av = S::set1(a0[off]);
        r00 = S::fmadd(av, b0, r00);
        r01 = S::fmadd(av, b1, r01);
        av = S::set1(a1[off]);
        r10 = S::fmadd(av, b0, r10);
        r11 = S::fmadd(av, b1, r11);
        av = S::set1(a2[off]);
        r20 = S::fmadd(av, b0, r20);
        r21 = S::fmadd(av, b1, r21);
        av = S::set1(a3[off]);
        r30 = S::fmadd(av, b0, r30);
        r31 = S::fmadd(av, b1, r31);
      }
      S::store(c0 + j, r00);
      S::store(c0 + j + W, r01);
      S::store(c1 + j, r10);
      S::store(c1 + j + W, r11);
      S::store(c2 + j, r20);
      S::store(c2 + j + W, r21);
      S::store(c3 + j, r30);
      S::store(c3 + j + W, r31);
    }
    for (; j + W <= n; j += W) {
      V r0 = S::load(c0 + j), r1 = S::load(c1 + j);
      V r2 = S::load(c2 + j), r3 = S::load(c3 + j);
      const T* bp = b + j;
      for (int p = 0; p < k; ++p, bp += ldb) {
        const std::size_t off = static_cast<std::size_t>(p) * aps;
        const V b0 = S::load(bp);
        r0 = S::fmadd(S::set1(a0[off]), b0, r0);
        r1 = S::fmadd(S::set1(a1[off]), b0, r1);
        r2 = S::fmadd(S::set1(a2[off]), b0, r2);
        r3 = S::fmadd(S::set1(a3[off]), b0, r3);
      }
      S::store(c0 + j, r0);
      S::store(c1 + j, r1);
      S::store(c2 + j, r2);
      S::store(c3 + j, r3);
    }
    for (; j < n; ++j) {
      T s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
      for (int p = 0; p < k; ++p) {
        const std::size_t off = static_cast<std::size_t>(p) * aps;
        const T bv = b[static_cast<std::size_t>(p) * ldb + j];
        s0 = std::fma(a0[off], bv, s0);
        s1 = std::fma(a1[off], bv, s1);
        s2 = std::fma(a2[off], bv, s2);
        s3 = std::fma(a3[off], bv, s3);
      }
      c0[j] = s0;
      c1[j] = s1;
      c2[j] = s2;
      c3[j] = s3;
    }
  }
  for (; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * ars;
    T* ci = c + static_cast<std::size_t>(i) * ldc;
    int j = 0;
    for (; j + W <= n; j += W) {
      V r = S::load(ci + j);
      const T* bp = b + j;
      for (int p = 0; p < k; ++p, bp += ldb)
        r = S::fmadd(S::set1(ai[static_cast<std::size_t>(p) * aps]), S::load(bp), r);
      S::store(ci + j, r);
    }
    for (; j < n; ++j) {
      T s = ci[j];
      for (int p = 0; p < k; ++p)
        s = std::fma(ai[static_cast<std::size_t>(p) * aps], b[static_cast<std::size_t>(p) * ldb + j], s);
      ci[j] = s;
    }
  }
}

template <typename S>
void gemm_nn(int m, int n, int k, const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  gemm_strided_a<S>(m, n, k, a, static_cast<std::size_t>(k), 1, b, c);
}

template <typename S>
void gemm_tn(int m, int n, int k, const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  gemm_strided_a<S>(m, n, k, a, 1, static_cast<std::size_t>(m), b, c);
}

template <typename S>
typename S::T dot_impl(std::size_t n, const typename S::T* x, const typename S::T* y) {
  using V = typename S::V;
  constexpr std::size_t W = S::W;
  V acc0 = S::zero(), acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = S::fmadd(S::load(x + i), S::load(y + i), acc0);
    acc1 = S::fmadd(S::load(x + i + W), S::load(y + i + W), acc1);
  }
  for (; i + W <= n; i += W) acc0 = S::fmadd(S::load(x + i), S::load(y + i), acc0);
  typename S::T s = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

// C[m x n] += A[m x k] * B[n x k]^T, two rows of A against two rows of B.
template <typename S>
void gemm_nt(int m, int n, int k, const typename S::T* a, const typename S::T* b,
             typename S::T* c) {
  using T = typename S::T;
  using V = typename S::V;
  constexpr int W = S::W;
  const std::size_t lda = static_cast<std::size_t>(k);
  const std::size_t ldc = static_cast<std::size_t>(n);
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    const T* a0 = a + static_cast<std::size_t>(i) * lda;
    const T* a1 = a0 + lda;
    int j = 0;
    for (; j + 2 <= n; j += 2) {
      const T* b0 = b + static_cast<std::size_t>(j) * lda;
      const T* b1 = b0 + lda;
      V s00 = S::zero(), s01 = S::zero(), s10 = S::zero(), s11 = S::zero();
      int p = 0;
      for (; p + W <= k; p += W) {
        const V va0 = S::load(a0 + p), va1 = S::load(a1 + p);
        const V vb0 = S::load(b0 + p), vb1 = S::load(b1 + p);
        s00 = S::fmadd(va0, vb0, s00);
        s01 = S::fmadd(va0, vb1, s01);
        s10 = S::fmadd(va1, vb0, s10);
        s11 = S::fmadd(va1, vb1, s11);
      }
      T t00 = S::hsum(s00), t01 = S::hsum(s01), t10 = S::hsum(s10), t11 = S::hsum(s11);
      for (; p < k; ++p) {
        t00 = std::fma(a0[p], b0[p], t00);
        t01 = std::fma(a0[p], b1[p], t01);
        t10 = std::fma(a1[p], b0[p], t10);
        t11 = std::fma(a1[p], b1[p], t11);
      }
      c[static_cast<std::size_t>(i) * ldc + j] += t00;
      c[static_cast<std::size_t>(i) * ldc + j + 1] += t01;
      c[static_cast<std::size_t>(i + 1) * ldc + j] += t10;
      c[static_cast<std::size_t>(i + 1) * ldc + j + 1] += t11;
    }
    for (; j < n; ++j) {
      const T* bj = b + static_cast<std::size_t>(j) * lda;
      c[static_cast<std::size_t>(i) * ldc + j] += dot_impl<S>(lda, a0, bj);
      c[static_cast<std::size_t>(i + 1) * ldc + j] += dot_impl<S>(lda, a1, bj);
    }
  }
  for (; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * lda;
    for (int j = 0; j < n; ++j)
      c[static_cast<std::size_t>(i) * ldc + j] +=
          dot_impl<S>(lda, ai, b + static_cast<std::size_t>(j) * lda);
  }
}

template <typename S>
void axpy(std::size_t n, typename S::T alpha, const typename S::T* x, typename S::T* y) {
  constexpr std::size_t W = S::W;
  const auto va = S::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) S::store(y + i, S::fmadd(va, S::load(x + i), S::load(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <typename S>
typename S::T sum(std::size_t n, const typename S::T* x) {
  using V = typename S::V;
  constexpr std::size_t W = S::W;
  V acc0 = S::zero(), acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = S::add(acc0, S::load(x + i));
    acc1 = S::add(acc1, S::load(x + i + W));
  }
  for (; i + W <= n; i += W) acc0 = S::add(acc0, S::load(x + i));
  typename S::T s = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

template <typename S>
KernelTable<typename S::T> make_table() {
  return {&gemm_nn<S>, &gemm_nt<S>, &gemm_tn<S>, &axpy<S>, &dot_impl<S>, &sum<S>};
}

}  // namespace feddiv::kernels::detail::simd
