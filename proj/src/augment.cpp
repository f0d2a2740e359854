#include "alzhinet/augment.hpp"

#include "alzhinet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alzhinet::aug {

namespace {

constexpr const char* kKindNames[] = {
    "elastic",     "invert",         "sharpness",     "salt_pepper", "brightness",
    "color_jitter", "gaussian_noise", "gaussian_blur", "occlusion",
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Normalized 1D gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

// Separable gaussian smoothing of one H x W plane with border replication.
void smooth_plane(const double* src, int h, int w, const std::vector<double>& kernel,
                  double* dst) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int xx = std::clamp(x + t, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(t + radius)] * src[y * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int yy = std::clamp(y + t, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(t + radius)] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      dst[y * w + x] = acc;
    }
}

// Two-lerp bilinear sample with border replication. Exact at integer
// coordinates and on constant images.
double bilinear(const Image& img, int c, double fy, double fx) {
  const int h = img.height, w = img.width;
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ty = fy - y0, tx = fx - x0;
  const double v00 = img.at(c, y0, x0), v01 = img.at(c, y0, x1);
  const double v10 = img.at(c, y1, x0), v11 = img.at(c, y1, x1);
  const double top = v00 + tx * (v01 - v00);
  const double bot = v10 + tx * (v11 - v10);
  return top + ty * (bot - top);
}

}  // namespace

const char* kind_name(Kind kind) { return kKindNames[static_cast<int>(kind)]; }

Kind kind_from_name(const std::string& name) {
  for (int i = 0; i < 9; ++i)
    if (name == kKindNames[i]) return static_cast<Kind>(i);
  throw ConfigError("unknown augmentation kind '" + name + "'");
}

void AugSpec::validate() const {
  switch (kind) {
    case Kind::elastic:
      if (a < 0.0) throw ParamError("elastic alpha must be >= 0");
      if (b <= 0.0) throw ParamError("elastic sigma must be > 0");
      break;
    case Kind::invert:
      break;
    case Kind::sharpness:
      if (a < 0.0) throw ParamError("sharpness factor must be >= 0");
      break;
    case Kind::salt_pepper:
      if (a < 0.0 || a > 1.0) throw ParamError("salt_pepper amount must be in [0,1]");
      break;
    case Kind::brightness:
      if (a < -1.0 || a > 1.0) throw ParamError("brightness delta must be in [-1,1]");
      break;
    case Kind::color_jitter:
      if (a < 0.0 || a > 1.0) throw ParamError("color_jitter strength must be in [0,1]");
      break;
    case Kind::gaussian_noise:
      if (a < 0.0) throw ParamError("gaussian_noise sigma must be >= 0");
      break;
    case Kind::gaussian_blur:
      if (a <= 0.0) throw ParamError("gaussian_blur sigma must be > 0");
      break;
    case Kind::occlusion:
      if (a <= 0.0 || a >= 1.0) throw ParamError("occlusion fraction must be in (0,1)");
      break;
  }
}

std::string AugSpec::describe() const {
  std::string s = kind_name(kind);
  if (kind == Kind::invert) return s;
  s += "(" + std::to_string(a);
  if (kind == Kind::elastic) s += "," + std::to_string(b);
  return s + ")";
}

std::vector<AugSpec> default_roster() { return default_roster(9); }

std::vector<AugSpec> default_roster(std::size_t first_n) {
  const std::vector<AugSpec> all = {
      AugSpec::elastic(8.0, 4.0),     AugSpec::invert(),
      AugSpec::sharpness(2.0),        AugSpec::salt_pepper(0.01),
      AugSpec::brightness(0.1),       AugSpec::color_jitter(0.2),
      AugSpec::gaussian_noise(0.05),  AugSpec::gaussian_blur(1.0),
      AugSpec::occlusion(0.04),
  };
  if (first_n == 0 || first_n > all.size())
    throw ParamError("roster size must be in [1,9], got " + std::to_string(first_n));
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(first_n)};
}

std::uint64_t derive_stream_seed(const SeedContext& ctx) {
  // Field-tagged mixes keep (epoch, sample) and (sample, epoch) distinct.
  std::uint64_t s = ctx.global_seed;
  s ^= splitmix64_mix(0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(ctx.epoch));
  s ^= splitmix64_mix(0xc2b2ae3d27d4eb4full + static_cast<std::uint64_t>(ctx.sample_index));
  s ^= splitmix64_mix(0x165667b19e3779f9ull + static_cast<std::uint64_t>(ctx.aug_index));
  return splitmix64_mix(s);
}

RngStream derive_stream(const SeedContext& ctx) { return RngStream(derive_stream_seed(ctx)); }

Image elastic_deform(const Image& img, double alpha, double sigma, RngStream& rng) {
  if (alpha < 0.0) throw ParamError("elastic alpha must be >= 0");
  if (sigma <= 0.0) throw ParamError("elastic sigma must be > 0");
  const int h = img.height, w = img.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> dx(plane), dy(plane);
  for (double& v : dx) v = rng.uniform(-1.0, 1.0);
  for (double& v : dy) v = rng.uniform(-1.0, 1.0);
  if (alpha == 0.0) return img;  // zero displacement regardless of the field

  const auto kernel = gaussian_kernel(sigma);
  std::vector<double> sx(plane), sy(plane);
  smooth_plane(dx.data(), h, w, kernel, sx.data());
  smooth_plane(dy.data(), h, w, kernel, sy.data());

  Image out(img.channels, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double fy = y + alpha * sy[static_cast<std::size_t>(y) * w + x];
      const double fx = x + alpha * sx[static_cast<std::size_t>(y) * w + x];
      for (int c = 0; c < img.channels; ++c) out.at(c, y, x) = clamp01(bilinear(img, c, fy, fx));
    }
  return out;
}

Image invert(const Image& img) {
  Image out = img;
  out.pix = 1.0 - img.pix;
  return out;
}

Image sharpness(const Image& img, double factor) {
  if (factor < 0.0) throw ParamError("sharpness factor must be >= 0");
  const int h = img.height, w = img.width;
  Image out = img;
  if (factor == 1.0 || h < 3 || w < 3) return out;
  // 3x3 box blur on the interior; border rows/cols keep the original values,
  // so the unsharp delta is zero there.
  for (int c = 0; c < img.channels; ++c)
    for (int y = 1; y + 1 < h; ++y)
      for (int x = 1; x + 1 < w; ++x) {
        double acc = 0.0;
        for (int i = -1; i <= 1; ++i)
          for (int j = -1; j <= 1; ++j) acc += img.at(c, y + i, x + j);
        const double blurred = acc / 9.0;
        out.at(c, y, x) = clamp01(img.at(c, y, x) + (factor - 1.0) * (img.at(c, y, x) - blurred));
      }
  return out;
}

Image salt_pepper(const Image& img, double amount, RngStream& rng) {
  if (amount < 0.0 || amount > 1.0) throw ParamError("salt_pepper amount must be in [0,1]");
  const int h = img.height, w = img.width;
  const auto total = static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);
  const auto hits = static_cast<std::uint64_t>(std::llround(amount * static_cast<double>(total)));
  Image out = img;
  if (hits == 0) return out;

  // Partial Fisher-Yates: the first `hits` entries are a uniform draw without
  // replacement.
  std::vector<std::uint32_t> positions(total);
  std::iota(positions.begin(), positions.end(), 0u);
  for (std::uint64_t i = 0; i < hits; ++i) {
    const std::uint64_t j = i + rng.next_below(total - i);
    std::swap(positions[i], positions[j]);
  }
  for (std::uint64_t i = 0; i < hits; ++i) {
    const double v = (rng.next_below(2) == 1) ? 1.0 : 0.0;
    const int y = static_cast<int>(positions[i] / static_cast<std::uint32_t>(w));
    const int x = static_cast<int>(positions[i] % static_cast<std::uint32_t>(w));
    for (int c = 0; c < img.channels; ++c) out.at(c, y, x) = v;
  }
  return out;
}

Image brightness(const Image& img, double delta) {
  if (delta < -1.0 || delta > 1.0) throw ParamError("brightness delta must be in [-1,1]");
  Image out = img;
  for (Index i = 0; i < out.size(); ++i) out.pix[i] = clamp01(img.pix[i] + delta);
  return out;
}

Image contrast(const Image& img, double p) {
  if (p < 0.0 || p > 1.0) throw ParamError("contrast fraction must be in [0,1]");
  Image out = img;
  for (Index i = 0; i < out.size(); ++i) out.pix[i] = clamp01((1.0 - p) * img.pix[i] + p * 0.5);
  return out;
}

Image color_jitter(const Image& img, double strength, RngStream& rng) {
  if (strength < 0.0 || strength > 1.0) throw ParamError("color_jitter strength must be in [0,1]");
  const double b = rng.uniform(-strength, strength);
  const double c = rng.uniform(-strength, strength);
  Image shifted = brightness(img, b);
  const double mean = shifted.pix.mean();
  Image out = shifted;
  for (Index i = 0; i < out.size(); ++i)
    out.pix[i] = clamp01(shifted.pix[i] + c * (shifted.pix[i] - mean));
  return out;
}

Image gaussian_noise(const Image& img, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ParamError("gaussian_noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  Image out = img;
  for (Index i = 0; i < out.size(); ++i) out.pix[i] = clamp01(img.pix[i] + sigma * rng.normal());
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) throw ParamError("gaussian_blur sigma must be > 0");
  const auto kernel = gaussian_kernel(sigma);
  Image out(img.channels, img.height, img.width);
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c)
    smooth_plane(img.pix.data() + c * plane, img.height, img.width, kernel,
                 out.pix.data() + c * plane);
  for (Index i = 0; i < out.size(); ++i) out.pix[i] = clamp01(out.pix[i]);
  return out;
}

Image occlude(const Image& img, double area_fraction, RngStream& rng) {
  if (area_fraction <= 0.0 || area_fraction >= 1.0)
    throw ParamError("occlusion fraction must be in (0,1)");
  const int h = img.height, w = img.width;
  const int side = static_cast<int>(std::llround(std::sqrt(area_fraction) * std::min(h, w)));
  Image out = img;
  if (side == 0) return out;
  const int y0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(h - side + 1)));
  const int x0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w - side + 1)));
  for (int c = 0; c < img.channels; ++c)
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x) out.at(c, y, x) = 0.0;
  return out;
}

Image apply(const AugSpec& spec, const Image& img, RngStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case Kind::elastic: return elastic_deform(img, spec.a, spec.b, rng);
    case Kind::invert: return invert(img);
    case Kind::sharpness: return sharpness(img, spec.a);
    case Kind::salt_pepper: return salt_pepper(img, spec.a, rng);
    case Kind::brightness: return brightness(img, spec.a);
    case Kind::color_jitter: return color_jitter(img, spec.a, rng);
    case Kind::gaussian_noise: return gaussian_noise(img, spec.a, rng);
    case Kind::gaussian_blur: return gaussian_blur(img, spec.a);
    case Kind::occlusion: return occlude(img, spec.a, rng);
  }
  throw ParamError("unreachable augmentation kind");
}

Image apply(const AugSpec& spec, const Image& img, const SeedContext& ctx) {
  RngStream rng = derive_stream(ctx);
  return apply(spec, img, rng);
}

Volume build_volume(const Image& img, const std::vector<AugSpec>& roster, const SeedContext& ctx) {
  if (roster.empty()) throw ParamError("augmentation roster must be non-empty");
  Volume vol(static_cast<int>(roster.size()), img.channels, img.height, img.width);
  for (std::size_t i = 0; i < roster.size(); ++i) {
    SeedContext slice_ctx = ctx;
    slice_ctx.aug_index = static_cast<std::int64_t>(i);
    vol.set_slice(static_cast<int>(i), apply(roster[i], img, slice_ctx));
  }
  return vol;
}

}  // namespace alzhinet::aug
