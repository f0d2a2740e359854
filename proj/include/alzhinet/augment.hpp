#pragma once

#include "alzhinet/image.hpp"
#include "alzhinet/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace alzhinet::aug {

enum class Kind {
  elastic,
  invert,
  sharpness,
  salt_pepper,
  brightness,
  color_jitter,
  gaussian_noise,
  gaussian_blur,
  occlusion,
};

const char* kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

/// One augmentation with its numeric parameters (meaning depends on kind).
struct AugSpec {
  Kind kind;
  double a = 0.0;  // elastic alpha | sharpness factor | amount | delta | strength | sigma | fraction
  double b = 0.0;  // elastic sigma

  static AugSpec elastic(double alpha, double sigma) { return {Kind::elastic, alpha, sigma}; }
  static AugSpec invert() { return {Kind::invert}; }
  static AugSpec sharpness(double factor) { return {Kind::sharpness, factor}; }
  static AugSpec salt_pepper(double amount) { return {Kind::salt_pepper, amount}; }
  static AugSpec brightness(double delta) { return {Kind::brightness, delta}; }
  static AugSpec color_jitter(double strength) { return {Kind::color_jitter, strength}; }
  static AugSpec gaussian_noise(double sigma) { return {Kind::gaussian_noise, sigma}; }
  static AugSpec gaussian_blur(double sigma) { return {Kind::gaussian_blur, sigma}; }
  static AugSpec occlusion(double fraction) { return {Kind::occlusion, fraction}; }

  void validate() const;
  std::string describe() const;
};

/// The canonical nine-kind roster, in its fixed order, with the default
/// training-time magnitudes. Ablation subsets take the first n kinds.
std::vector<AugSpec> default_roster();
std::vector<AugSpec> default_roster(std::size_t first_n);

/// Everything that pins down one augmentation stream. The derived seed is a
/// pure function of the four fields; equal contexts replay identical draws.
struct SeedContext {
  std::uint64_t global_seed = 0;
  std::int64_t epoch = 0;
  std::int64_t sample_index = 0;
  std::int64_t aug_index = 0;
};

std::uint64_t derive_stream_seed(const SeedContext& ctx);
RngStream derive_stream(const SeedContext& ctx);

// The augmentation kernels. Every kernel maps [0,1] images to [0,1] images;
// identity parameters (alpha=0, factor=1, amount=0, delta=0, strength=0,
// sigma=0) reproduce the input bit for bit.
Image elastic_deform(const Image& img, double alpha, double sigma, RngStream& rng);
Image invert(const Image& img);
Image sharpness(const Image& img, double factor);
Image salt_pepper(const Image& img, double amount, RngStream& rng);
Image brightness(const Image& img, double delta);
Image contrast(const Image& img, double p);  // blend toward mid-gray; p=1 is constant 0.5
Image color_jitter(const Image& img, double strength, RngStream& rng);
Image gaussian_noise(const Image& img, double sigma, RngStream& rng);
Image gaussian_blur(const Image& img, double sigma);
Image occlude(const Image& img, double area_fraction, RngStream& rng);

Image apply(const AugSpec& spec, const Image& img, RngStream& rng);
Image apply(const AugSpec& spec, const Image& img, const SeedContext& ctx);

/// Stacks |roster| augmentations of the same source image into a volume;
/// slice i uses aug_index = i in the seed context.
Volume build_volume(const Image& img, const std::vector<AugSpec>& roster, const SeedContext& ctx);

}  // namespace alzhinet::aug
