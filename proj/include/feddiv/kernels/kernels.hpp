#pragma once

// Dense arithmetic kernels used by the network engine.
//
// Every kernel has a scalar reference implementation plus vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64). The active backend is picked once at
// first use from the CPU features, and can be overridden with the
// FEDDIV_KERNELS environment variable (scalar | avx2 | neon | auto) or
// set_backend(). Within one backend every kernel is bit-deterministic: the
// summation order for a given output element depends only on the sizes.
//
// Matrices are dense row-major. All gemm variants accumulate into C.

#include <cstddef>
#include <string_view>

namespace feddiv::kernels {

enum class Backend { scalar, avx2, neon };

template <typename T>
struct KernelTable {
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(int m, int n, int k, const T* a, const T* b, T* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(int m, int n, int k, const T* a, const T* b, T* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(int m, int n, int k, const T* a, const T* b, T* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  T (*sum)(std::size_t n, const T* x);
};

bool backend_supported(Backend backend);
Backend active_backend();
// Throws std::invalid_argument if the backend is not available on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);
// Accepts "scalar", "avx2", "neon"; throws std::invalid_argument otherwise.
Backend parse_backend(std::string_view name);

template <typename T>
const KernelTable<T>& table(Backend backend);

template <typename T>
const KernelTable<T>& active() {
  return table<T>(active_backend());
}

template <typename T>
inline void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  active<T>().gemm_nn(m, n, k, a, b, c);
}
template <typename T>
inline void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  active<T>().gemm_nt(m, n, k, a, b, c);
}
template <typename T>
inline void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  active<T>().gemm_tn(m, n, k, a, b, c);
}
template <typename T>
inline void axpy(std::size_t n, T alpha, const T* x, T* y) {
  active<T>().axpy(n, alpha, x, y);
}
template <typename T>
inline T dot(std::size_t n, const T* x, const T* y) {
  return active<T>().dot(n, x, y);
}
template <typename T>
inline T sum(std::size_t n, const T* x) {
  return active<T>().sum(n, x);
}

}  // namespace feddiv::kernels
