#pragma once

#include <cstdint>

#include "feddiv/data/dataset.hpp"

namespace feddiv::data {

// Prototype-plus-noise dataset description. Each class has one smooth
// prototype image; each sample is clamp(prototype + N(0, noise_std)).
//
// class_separation blends each prototype with an image shared by all classes:
// prototype_c = (1 - a) * shared + a * own_c. Lower values make classes
// harder to tell apart.
struct SyntheticSpec {
  int class_count = 10;
  Shape image_shape{1, 28, 28};
  std::uint64_t prototype_seed = 0;
  double noise_std = 0.1;
  std::size_t samples_per_class = 100;
  double class_separation = 1.0;
};

void validate(const SyntheticSpec& spec);

struct SyntheticDraw {
  Dataset dataset;
  Tensor prototypes;  // (class_count, C, H, W)
  Tensor noise;       // raw Gaussian draws, same shape as dataset.images
};

// Samples are ordered class-major: class 0 first, then class 1, ...
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);
SyntheticDraw generate_synthetic_with_noise(const SyntheticSpec& spec, std::uint64_t seed);

// The prototypes alone; depends only on spec.prototype_seed.
Tensor synthetic_prototypes(const SyntheticSpec& spec);

}  // namespace feddiv::data
