#include "feddiv/data/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace feddiv::data {
namespace {

struct Planes {
  std::size_t count;  // N * C
  std::size_t h;
  std::size_t w;
};

Planes planes_of(const Tensor& images) {
  const auto& s = images.shape();
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0] * s[1], s[2], s[3]};
  throw ShapeError("expected (C, H, W) or (N, C, H, W) images, got " + shape_to_string(s));
}

void check_image(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("expected one (C, H, W) image, got " + shape_to_string(image.shape()));
}

struct Tap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(src);
    taps[d] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
  }
  return taps;
}

// Resizes a window (y0, x0, h, w) of each plane to (oh, ow).
Tensor resample(const Tensor& src, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w,
                std::size_t oh, std::size_t ow, ResizeMethod method) {
  const Planes p = planes_of(src);
  Shape shape = src.shape();
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  Tensor out(shape);
  if (method == ResizeMethod::nearest) {
    std::vector<std::size_t> ys(oh), xs(ow);
    for (std::size_t d = 0; d < oh; ++d) ys[d] = std::min((2 * d + 1) * h / (2 * oh), h - 1);
    for (std::size_t d = 0; d < ow; ++d) xs[d] = std::min((2 * d + 1) * w / (2 * ow), w - 1);
    for (std::size_t c = 0; c < p.count; ++c) {
      const double* in = src.data() + c * p.h * p.w;
      double* dst = out.data() + c * oh * ow;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = in[(y0 + ys[y]) * p.w + x0 + xs[x]];
    }
    return out;
  }
  const auto ty = bilinear_taps(h, oh);
  const auto tx = bilinear_taps(w, ow);
  for (std::size_t c = 0; c < p.count; ++c) {
    const double* in = src.data() + c * p.h * p.w;
    double* dst = out.data() + c * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const double* r0 = in + (y0 + ty[y].i0) * p.w + x0;
      const double* r1 = in + (y0 + ty[y].i1) * p.w + x0;
      for (std::size_t x = 0; x < ow; ++x) {
        const Tap& t = tx[x];
        const double top = std::lerp(r0[t.i0], r0[t.i1], t.frac);
        const double bottom = std::lerp(r1[t.i0], r1[t.i1], t.frac);
        dst[y * ow + x] = std::lerp(top, bottom, ty[y].frac);
      }
    }
  }
  return out;
}

void check_jitter_width(double w, const char* field) {
  if (!(w >= 0.0 && w < 1.0)) throw ValidationError(std::string(field) + " half-width must be in [0, 1)", field);
}

}  // namespace

Tensor resize(const Tensor& images, std::size_t height, std::size_t width, ResizeMethod method) {
  if (height < 1 || width < 1) throw ValidationError("resize target dimensions must be >= 1");
  const Planes p = planes_of(images);
  if (p.h == height && p.w == width) return images;
  return resample(images, 0, 0, p.h, p.w, height, width, method);
}

Tensor apply_rrc(const Tensor& image, Rng& rng, Range scale, Range ratio) {
  check_image(image);
  if (!(scale.lo > 0.0 && scale.lo <= scale.hi && scale.hi <= 1.0))
    throw ValidationError("rrc scale range must satisfy 0 < lo <= hi <= 1");
  if (!(ratio.lo > 0.0 && ratio.lo <= ratio.hi)) throw ValidationError("rrc ratio range must satisfy 0 < lo <= hi");
  const std::size_t H = image.dim(1), W = image.dim(2);
  const double area = static_cast<double>(H * W);
  const double log_lo = std::log(ratio.lo), log_hi = std::log(ratio.hi);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale.lo, scale.hi);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<long long>(std::llround(std::sqrt(target * aspect)));
    const auto h = static_cast<long long>(std::llround(std::sqrt(target / aspect)));
    if (w > 0 && h > 0 && w <= static_cast<long long>(W) && h <= static_cast<long long>(H)) {
      const std::size_t y0 = rng.uniform_index(H - static_cast<std::size_t>(h) + 1);
      const std::size_t x0 = rng.uniform_index(W - static_cast<std::size_t>(w) + 1);
      return resample(image, y0, x0, static_cast<std::size_t>(h), static_cast<std::size_t>(w), H, W,
                      ResizeMethod::bilinear);
    }
  }
  // Centre crop clamped to the ratio range.
  const double in_ratio = static_cast<double>(W) / static_cast<double>(H);
  std::size_t w = W, h = H;
  if (in_ratio < ratio.lo) {
    h = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(static_cast<double>(W) / ratio.lo)), 1, H);
  } else if (in_ratio > ratio.hi) {
    w = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(static_cast<double>(H) * ratio.hi)), 1, W);
  }
  return resample(image, (H - h) / 2, (W - w) / 2, h, w, H, W, ResizeMethod::bilinear);
}

JitterFactors sample_jitter_factors(Rng& rng, const ColorJitterSpec& spec) {
  check_jitter_width(spec.brightness, "brightness");
  check_jitter_width(spec.contrast, "contrast");
  check_jitter_width(spec.saturation, "saturation");
  JitterFactors f;
  f.brightness = rng.uniform(1.0 - spec.brightness, 1.0 + spec.brightness);
  f.contrast = rng.uniform(1.0 - spec.contrast, 1.0 + spec.contrast);
  f.saturation = rng.uniform(1.0 - spec.saturation, 1.0 + spec.saturation);
  return f;
}

Tensor apply_color_jitter(const Tensor& image, const JitterFactors& factors) {
  check_image(image);
  Tensor out = image;
  const std::size_t C = image.dim(0), plane = image.dim(1) * image.dim(2);
  auto clamp_all = [&] {
    for (auto& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  };
  if (factors.brightness != 1.0) {
    for (auto& v : out.values()) v *= factors.brightness;
    clamp_all();
  }
  if (factors.contrast != 1.0) {
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data() + c * plane;
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      mean /= static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) p[i] = mean + factors.contrast * (p[i] - mean);
    }
    clamp_all();
  }
  if (factors.saturation != 1.0 && C == 3) {
    double* r = out.data();
    double* g = r + plane;
    double* b = g + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double gray = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
      r[i] = gray + factors.saturation * (r[i] - gray);
      g[i] = gray + factors.saturation * (g[i] - gray);
      b[i] = gray + factors.saturation * (b[i] - gray);
    }
    clamp_all();
  }
  return out;
}

Tensor apply_color_jitter(const Tensor& image, Rng& rng, const ColorJitterSpec& spec) {
  return apply_color_jitter(image, sample_jitter_factors(rng, spec));
}

Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
  Tensor out = image;
  if (sigma == 0.0) return out;
  for (auto& v : out.values()) v += sigma * rng.normal();
  return out;
}

void validate(const AugmentationSpec& spec) {
  if (!(spec.scale.lo > 0.0 && spec.scale.lo <= spec.scale.hi && spec.scale.hi <= 1.0))
    throw ValidationError("scale range must satisfy 0 < lo <= hi <= 1", "scale");
  if (!(spec.ratio.lo > 0.0 && spec.ratio.lo <= spec.ratio.hi))
    throw ValidationError("ratio range must satisfy 0 < lo <= hi", "ratio");
  check_jitter_width(spec.jitter.brightness, "brightness");
  check_jitter_width(spec.jitter.contrast, "contrast");
  check_jitter_width(spec.jitter.saturation, "saturation");
}

const char* augment_mode_name(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::none:
      return "none";
    case AugmentMode::rrc:
      return "rrc";
    case AugmentMode::cj:
      return "cj";
    case AugmentMode::both:
      return "both";
  }
  return "unknown";
}

AugmentMode parse_augment_mode(const std::string& name) {
  for (auto m : {AugmentMode::none, AugmentMode::rrc, AugmentMode::cj, AugmentMode::both})
    if (name == augment_mode_name(m)) return m;
  throw ValidationError("unknown augmentation mode '" + name + "'");
}

Tensor augment(const Tensor& image, Rng& rng, const AugmentationSpec& spec) {
  switch (spec.mode) {
    case AugmentMode::none:
      return image;
    case AugmentMode::rrc:
      return apply_rrc(image, rng, spec.scale, spec.ratio);
    case AugmentMode::cj:
      return apply_color_jitter(image, rng, spec.jitter);
    case AugmentMode::both:
      return apply_color_jitter(apply_rrc(image, rng, spec.scale, spec.ratio), rng, spec.jitter);
  }
  return image;
}

}  // namespace feddiv::data
