#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "feddiv/kernels/kernels.hpp"
#include "tables.hpp"

namespace feddiv::kernels {
namespace {

Backend detect_best() {
#if defined(FEDDIV_HAVE_AVX2)
  if (backend_supported(Backend::avx2)) return Backend::avx2;
#endif
#if defined(FEDDIV_HAVE_NEON)
  return Backend::neon;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  const char* env = std::getenv("FEDDIV_KERNELS");
  if (env == nullptr || std::string_view(env).empty() || std::string_view(env) == "auto")
    return detect_best();
  const Backend requested = parse_backend(env);
  if (!backend_supported(requested))
    throw std::invalid_argument("FEDDIV_KERNELS=" + std::string(env) +
                                " is not supported on this CPU");
  return requested;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(FEDDIV_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(FEDDIV_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend))
    throw std::invalid_argument("kernel backend '" + std::string(backend_name(backend)) +
                                "' is not supported on this CPU");
  current().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "neon") return Backend::neon;
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

template <>
const KernelTable<double>& table<double>(Backend backend) {
  switch (backend) {
#if defined(FEDDIV_HAVE_AVX2)
    case Backend::avx2:
      return detail::avx2_table_f64();
#endif
#if defined(FEDDIV_HAVE_NEON)
    case Backend::neon:
      return detail::neon_table_f64();
#endif
    default:
      return detail::scalar_table_f64();
  }
}

template <>
const KernelTable<float>& table<float>(Backend backend) {
  switch (backend) {
#if defined(FEDDIV_HAVE_AVX2)
    case Backend::avx2:
      return detail::avx2_table_f32();
#endif
#if defined(FEDDIV_HAVE_NEON)
    case Backend::neon:
      return detail::neon_table_f32();
#endif
    default:
      return detail::scalar_table_f32();
  }
}

}  // namespace feddiv::kernels
