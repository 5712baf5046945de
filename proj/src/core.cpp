#include <cmath>
#include <sstream>

#include "feddiv/error.hpp"
#include "feddiv/rng.hpp"
#include "feddiv/tensor.hpp"

namespace feddiv {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
      return "validation";
    case ErrorKind::shape_mismatch:
      return "shape_mismatch";
    case ErrorKind::io:
      return "io";
    case ErrorKind::bad_magic:
      return "bad_magic";
    case ErrorKind::truncated:
      return "truncated";
    case ErrorKind::count_mismatch:
      return "count_mismatch";
    case ErrorKind::config:
      return "config";
  }
  return "unknown";
}

namespace {
std::string compose(const std::string& message, const std::string& where) {
  return where.empty() ? message : where + ": " + message;
}
}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string where)
    : std::runtime_error(compose(message, where)), kind_(kind), where_(std::move(where)) {}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ValidationError("uniform_index requires n > 0");
  // Lemire's multiply-shift with rejection.
  const std::uint64_t range = n;
  std::uint64_t x = engine_();
  __uint128_t m = static_cast<__uint128_t>(x) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      x = engine_();
      m = static_cast<__uint128_t>(x) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ')';
  return out.str();
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template class BasicTensor<double>;
template class BasicTensor<float>;

}  // namespace feddiv
