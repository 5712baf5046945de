#include <algorithm>
#include <cmath>

#include "../parallel.hpp"
#include "feddiv/error.hpp"
#include "feddiv/lab/lab.hpp"
#include "feddiv/rng.hpp"

namespace feddiv::lab {
namespace {

using Vec = std::vector<double>;

struct Slice {
  std::size_t in = 0, hidden = 0, out = 0;
  Vec a1;  // hidden x in
  Vec b1;  // hidden
  Vec a2;  // out x hidden
  Vec z0;  // unit prototype input
  Vec d0;  // prototype upstream signal
  Activation activation = Activation::linear;
};

Vec dense_weight(std::size_t rows, std::size_t cols, WeightMode mode, std::uint64_t seed) {
  nn::ModelSpec spec;
  spec.input_shape = {cols};
  spec.num_classes = static_cast<int>(rows);
  spec.layers.push_back({"w", nn::DenseLayer{static_cast<int>(cols), static_cast<int>(rows)}});
  const auto scheme = mode == WeightMode::orthogonal ? nn::InitScheme::orthogonal : nn::InitScheme::kaiming_uniform;
  const auto params = nn::init_params<double>(spec, seed, scheme);
  const auto& w = params.layer(0).front().tensor.values();
  return Vec(w.begin(), w.end());
}

Vec normal_vector(std::size_t n, Rng& rng) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void normalize(Vec& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
}

Slice make_slice(const Theorem1Config& c) {
  Slice s;
  s.in = c.in_width;
  s.hidden = c.hidden_width;
  s.out = c.out_width;
  s.activation = c.activation;
  s.a1 = dense_weight(s.hidden, s.in, c.weight_mode, derive_seed(c.seed, 0, 1));
  s.a2 = dense_weight(s.out, s.hidden, c.weight_mode, derive_seed(c.seed, 0, 2));
  Rng rng(derive_seed(c.seed, 0, 3));
  s.b1 = Vec(s.hidden, 0.0);
  if (c.activation == Activation::relu)
    for (auto& b : s.b1) b = 0.1 * rng.normal();
  s.z0 = normal_vector(s.in, rng);
  normalize(s.z0);
  s.d0 = normal_vector(s.out, rng);
  normalize(s.d0);
  return s;
}

// Row factor (A2^T d) * act'(A1 z + b1) of G(d; z).
Vec row_factor(const Slice& s, const Vec& d, const Vec& z) {
  Vec r(s.hidden, 0.0);
  for (std::size_t o = 0; o < s.out; ++o)
    for (std::size_t h = 0; h < s.hidden; ++h) r[h] += s.a2[o * s.hidden + h] * d[o];
  if (s.activation == Activation::relu) {
    for (std::size_t h = 0; h < s.hidden; ++h) {
      double pre = s.b1[h];
      for (std::size_t i = 0; i < s.in; ++i) pre += s.a1[h * s.in + i] * z[i];
      if (pre <= 0.0) r[h] = 0.0;
    }
  }
  return r;
}

struct SampleStats {
  double eps_sq, eps_prev_sq, t1_sq, t2_sq, cross, identity_rel_error;
};

SampleStats sample(const Slice& s, const Theorem1Config& c, std::size_t k) {
  Rng rng(derive_seed(c.seed, k + 1));
  Vec e(s.out, 0.0);
  if (c.noise_std_upstream > 0.0)
    for (auto& v : e) v = c.noise_std_upstream * rng.normal();
  Vec z = s.z0;
  if (c.noise_std_input > 0.0) {
    for (auto& v : z) v += c.noise_std_input * rng.normal();
    normalize(z);
  }
  Vec d = s.d0;
  for (std::size_t o = 0; o < s.out; ++o) d[o] += e[o];

  const Vec r_full = row_factor(s, d, z);
  const Vec r_e = row_factor(s, e, z);
  const Vec r_d0 = row_factor(s, s.d0, z);
  const Vec r_proto = row_factor(s, s.d0, s.z0);

  SampleStats st{};
  for (double v : e) st.eps_sq += v * v;
  for (std::size_t h = 0; h < s.hidden; ++h) {
    for (std::size_t i = 0; i < s.in; ++i) {
      const double proto = r_proto[h] * s.z0[i];
      const double eps_prev = r_full[h] * z[i] - proto;
      const double t1 = r_e[h] * z[i];
      const double t2 = r_d0[h] * z[i] - proto;
      st.eps_prev_sq += eps_prev * eps_prev;
      st.t1_sq += t1 * t1;
      st.t2_sq += t2 * t2;
      st.cross += t1 * t2;
    }
  }
  const double expanded = st.t1_sq + st.t2_sq + 2.0 * st.cross;
  st.identity_rel_error =
      st.eps_prev_sq == 0.0 ? std::abs(expanded) : std::abs(st.eps_prev_sq - expanded) / st.eps_prev_sq;
  return st;
}

}  // namespace

const char* weight_mode_name(WeightMode m) { return m == WeightMode::random ? "random" : "orthogonal"; }

WeightMode parse_weight_mode(const std::string& name) {
  if (name == "random") return WeightMode::random;
  if (name == "orthogonal") return WeightMode::orthogonal;
  throw ValidationError("unknown weight mode '" + name + "'");
}

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "linear") return Activation::linear;
  throw ValidationError("unknown activation '" + name + "'");
}

void validate(const Theorem1Config& c) {
  if (c.in_width < 1 || c.hidden_width < 1 || c.out_width < 1)
    throw ValidationError("layer widths must be >= 1");
  if (c.n_samples < 1000) throw ValidationError("n_samples must be >= 1000", "n_samples");
  if (!(c.noise_std_upstream >= 0.0) || !std::isfinite(c.noise_std_upstream))
    throw ValidationError("noise_std_upstream must be finite and >= 0", "noise_std_upstream");
  if (!(c.noise_std_input >= 0.0) || !std::isfinite(c.noise_std_input))
    throw ValidationError("noise_std_input must be finite and >= 0", "noise_std_input");
  if (c.workers < 1) throw ValidationError("workers must be >= 1", "workers");
}

Theorem1Result theorem1_decomposition_check(const Theorem1Config& config) {
  validate(config);
  const Slice slice = make_slice(config);
  const std::size_t n = config.n_samples;
  std::vector<SampleStats> samples(n);
  detail::parallel_for(n, config.workers, [&](std::size_t k) { samples[k] = sample(slice, config, k); });

  Theorem1Result r;
  for (const auto& s : samples) {
    r.mean_eps_sq += s.eps_sq;
    r.mean_eps_prev_sq += s.eps_prev_sq;
    r.mean_t1_sq += s.t1_sq;
    r.mean_t2_sq += s.t2_sq;
    r.mean_cross += s.cross;
    r.max_identity_rel_error = std::max(r.max_identity_rel_error, s.identity_rel_error);
  }
  const double dn = static_cast<double>(n);
  r.mean_eps_sq /= dn;
  r.mean_eps_prev_sq /= dn;
  r.mean_t1_sq /= dn;
  r.mean_t2_sq /= dn;
  r.mean_cross /= dn;
  double ss = 0.0;
  for (const auto& s : samples) ss += (s.cross - r.mean_cross) * (s.cross - r.mean_cross);
  r.cross_stderr = std::sqrt(ss / (dn - 1.0) / dn);

  r.identity_holds = r.max_identity_rel_error <= Theorem1Result::kIdentityTolerance;
  r.cross_vanishes = std::abs(r.mean_cross) <= 3.0 * r.cross_stderr;
  const double parts = r.mean_t1_sq + r.mean_t2_sq;
  r.additive = std::abs(r.mean_eps_prev_sq - parts) <= Theorem1Result::kAdditivityTolerance * parts;
  r.isometric = config.weight_mode == WeightMode::orthogonal && config.activation == Activation::linear &&
                config.out_width <= config.hidden_width;
  if (r.isometric) {
    const double growth = r.mean_eps_prev_sq - r.mean_eps_sq;
    r.growth_matches_t2 =
        std::abs(growth - r.mean_t2_sq) <= Theorem1Result::kGrowthTolerance * std::max(r.mean_t2_sq, parts);
    r.no_smaller = r.mean_eps_prev_sq >= r.mean_eps_sq;
  }
  return r;
}

std::vector<double> isometric_chain_profile(std::size_t depth, std::size_t width, std::size_t n_samples,
                                            double noise_std_upstream, double noise_std_input, std::uint64_t seed) {
  if (depth < 1) throw ValidationError("depth must be >= 1");
  std::vector<double> out(depth);
  double upstream_sq = static_cast<double>(width) * noise_std_upstream * noise_std_upstream;
  for (std::size_t k = depth; k >= 1; --k) {
    Theorem1Config c;
    c.in_width = c.hidden_width = c.out_width = width;
    c.n_samples = n_samples;
    c.noise_std_upstream = std::sqrt(upstream_sq / static_cast<double>(width));
    c.noise_std_input = noise_std_input;
    c.seed = derive_seed(seed, k);
    c.weight_mode = WeightMode::orthogonal;
    c.activation = Activation::linear;
    upstream_sq = theorem1_decomposition_check(c).mean_eps_prev_sq;
    out[k - 1] = upstream_sq;
  }
  return out;
}

}  // namespace feddiv::lab
