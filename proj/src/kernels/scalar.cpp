// Reference kernels. Compiled with -ffp-contract=off so results do not depend
// on whether the compiler fuses multiply-adds.

#include "tables.hpp"

namespace feddiv::kernels::detail {
namespace {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T aip = arow[p];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[static_cast<std::size_t>(i) * n + j] += acc;
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T api = arow[i];
      T* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
T sum(std::size_t n, const T* x) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return {&gemm_nn<T>, &gemm_nt<T>, &gemm_tn<T>, &axpy<T>, &dot<T>, &sum<T>};
}

constexpr KernelTable<double> kTableF64 = make_table<double>();
constexpr KernelTable<float> kTableF32 = make_table<float>();

}  // namespace

const KernelTable<double>& scalar_table_f64() { return kTableF64; }
const KernelTable<float>& scalar_table_f32() { return kTableF32; }

}  // namespace feddiv::kernels::detail
