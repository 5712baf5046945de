#pragma once

#include <string>

#include "feddiv/rng.hpp"
#include "feddiv/tensor.hpp"

namespace feddiv::data {

enum class ResizeMethod { nearest, bilinear };

// Resamples (C, H, W) or (N, C, H, W) images to (height, width) with
// half-pixel centres. Equal sizes return the input unchanged.
Tensor resize(const Tensor& images, std::size_t height, std::size_t width,
              ResizeMethod method = ResizeMethod::bilinear);

struct Range {
  double lo;
  double hi;
};

// Random resized crop on one (C, H, W) image. Area fraction is uniform in
// `scale`, aspect ratio log-uniform in `ratio`; after 10 rejected attempts a
// centre crop is used. The crop is resized back to (H, W) bilinearly.
Tensor apply_rrc(const Tensor& image, Rng& rng, Range scale = {0.4, 1.0}, Range ratio = {3.0 / 4.0, 4.0 / 3.0});

struct ColorJitterSpec {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
};

struct JitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

// Draws each factor from U[1 - w, 1 + w] in the order brightness, contrast,
// saturation.
JitterFactors sample_jitter_factors(Rng& rng, const ColorJitterSpec& spec);

// Brightness scales pixels, contrast blends with the per-channel mean and
// saturation blends with the luma image (3-channel images only). Results are
// clamped to [0, 1] after each step; a factor of exactly 1 skips its step.
Tensor apply_color_jitter(const Tensor& image, const JitterFactors& factors);
Tensor apply_color_jitter(const Tensor& image, Rng& rng, const ColorJitterSpec& spec = {});

// Adds N(0, sigma) to every element. The result is not clamped.
Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng);

enum class AugmentMode { none, rrc, cj, both };

struct AugmentationSpec {
  AugmentMode mode = AugmentMode::none;
  Range scale{0.4, 1.0};
  Range ratio{3.0 / 4.0, 4.0 / 3.0};
  ColorJitterSpec jitter;
};

void validate(const AugmentationSpec& spec);
const char* augment_mode_name(AugmentMode mode);
AugmentMode parse_augment_mode(const std::string& name);

// Crop first, then jitter, as selected by spec.mode. Consumes no randomness
// for mode none.
Tensor augment(const Tensor& image, Rng& rng, const AugmentationSpec& spec);

}  // namespace feddiv::data
