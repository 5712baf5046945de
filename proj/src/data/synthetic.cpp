#include "feddiv/data/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "feddiv/rng.hpp"

namespace feddiv::data {
namespace {

constexpr int kBlobsPerChannel = 3;

// Sum of Gaussian blobs per channel, rescaled to [0.1, 0.9].
std::vector<double> blob_image(const Shape& shape, Rng& rng) {
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  const double extent = static_cast<double>(std::min(h, w));
  std::vector<double> img(c * h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = img.data() + ch * h * w;
    for (int b = 0; b < kBlobsPerChannel; ++b) {
      const double cy = rng.uniform(0.2, 0.8) * static_cast<double>(h);
      const double cx = rng.uniform(0.2, 0.8) * static_cast<double>(w);
      const double sd = rng.uniform(0.08, 0.2) * extent;
      const double amp = rng.uniform(0.5, 1.0);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = (static_cast<double>(y) + 0.5 - cy) / sd;
          const double dx = (static_cast<double>(x) + 0.5 - cx) / sd;
          plane[y * w + x] += amp * std::exp(-0.5 * (dy * dy + dx * dx));
        }
    }
    const double peak = *std::max_element(plane, plane + h * w);
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = 0.1 + 0.8 * plane[i] / peak;
  }
  return img;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.class_count < 1) throw ValidationError("class_count must be >= 1", "class_count");
  if (spec.image_shape.size() != 3) throw ValidationError("image_shape must be (C, H, W)", "image_shape");
  for (std::size_t d : spec.image_shape)
    if (d == 0) throw ValidationError("image_shape dimensions must be positive", "image_shape");
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std))
    throw ValidationError("noise_std must be finite and >= 0", "noise_std");
  if (spec.samples_per_class < 1) throw ValidationError("samples_per_class must be >= 1", "samples_per_class");
  if (!(spec.class_separation >= 0.0 && spec.class_separation <= 1.0))
    throw ValidationError("class_separation must be in [0, 1]", "class_separation");
}

Tensor synthetic_prototypes(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t size = shape_size(spec.image_shape);
  Rng shared_rng(derive_seed(spec.prototype_seed, 0));
  const auto shared = blob_image(spec.image_shape, shared_rng);
  const double a = spec.class_separation;
  Shape shape{static_cast<std::size_t>(spec.class_count)};
  shape.insert(shape.end(), spec.image_shape.begin(), spec.image_shape.end());
  Tensor out(shape);
  for (int c = 0; c < spec.class_count; ++c) {
    Rng rng(derive_seed(spec.prototype_seed, static_cast<std::uint64_t>(c) + 1));
    const auto own = blob_image(spec.image_shape, rng);
    double* dst = out.data() + static_cast<std::size_t>(c) * size;
    for (std::size_t i = 0; i < size; ++i) dst[i] = a == 1.0 ? own[i] : (1.0 - a) * shared[i] + a * own[i];
  }
  return out;
}

SyntheticDraw generate_synthetic_with_noise(const SyntheticSpec& spec, std::uint64_t seed) {
  SyntheticDraw draw;
  draw.prototypes = synthetic_prototypes(spec);
  const std::size_t size = shape_size(spec.image_shape);
  const std::size_t n = spec.samples_per_class * static_cast<std::size_t>(spec.class_count);
  Shape shape{n};
  shape.insert(shape.end(), spec.image_shape.begin(), spec.image_shape.end());
  draw.dataset.images = Tensor(shape);
  draw.noise = Tensor(shape);
  draw.dataset.class_count = spec.class_count;
  draw.dataset.labels.reserve(n);
  Rng rng(seed);
  std::size_t row = 0;
  for (int c = 0; c < spec.class_count; ++c) {
    const double* proto = draw.prototypes.data() + static_cast<std::size_t>(c) * size;
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      double* img = draw.dataset.images.data() + row * size;
      double* noise = draw.noise.data() + row * size;
      for (std::size_t i = 0; i < size; ++i) {
        noise[i] = spec.noise_std == 0.0 ? 0.0 : spec.noise_std * rng.normal();
        img[i] = std::clamp(proto[i] + noise[i], 0.0, 1.0);
      }
      draw.dataset.labels.push_back(c);
    }
  }
  return draw;
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  return generate_synthetic_with_noise(spec, seed).dataset;
}

}  // namespace feddiv::data
