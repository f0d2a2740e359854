#pragma once

#include "alzhinet/augment.hpp"
#include "alzhinet/image.hpp"
#include "alzhinet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace alzhinet::data {

/// Labeled image collection. Immutable after construction; class indices
/// point into class_names, which is ordered lexicographically for directory
/// trees.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string provenance;

  std::size_t size() const { return images.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<std::size_t> class_counts() const;
};

struct SplitSpec {
  double train_fraction = 0.7;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct SyntheticSpec {
  int num_classes = 4;
  int per_class = 50;
  int image_size = 32;
  double noise_sigma = 0.06;
  std::uint64_t seed = 0;
};

/// Loads `root/<class_name>/*.pgm|*.ppm`; classes are the subdirectory names
/// in lexicographic order. Undecodable files are skipped with a counter;
/// an empty class or a root with fewer than two classes is an error.
Dataset load_image_dir(const std::filesystem::path& root, int* skipped = nullptr);

/// Bilinear resize, align-corners-false, border-replicated sampling.
Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Grayscale to 3 channels by copying; 3-channel input passes through.
Image replicate_channels(const Image& img);

/// Resizes everything to (h, w) and replicates channels, the form the models
/// consume.
Dataset prepared(const Dataset& ds, int h, int w);

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// Raises per-class counts to `target_counts` by duplicating random class
/// members with one randomly chosen augmentation applied to each duplicate.
Dataset oversample_minority(const Dataset& train, const std::map<int, std::size_t>& target_counts,
                            const std::vector<aug::AugSpec>& roster, std::uint64_t seed);

/// Class-distinct oriented sinusoidal textures plus seeded noise; separable
/// enough for a desk-scale model to overfit.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Writes a dataset as a PGM/PPM directory tree (the synth command's output).
void write_image_dir(const Dataset& ds, const std::filesystem::path& root);

// Batch assembly for the models.
Tensor images_to_tensor(const Dataset& ds, std::span<const std::size_t> indices);
Tensor volumes_to_tensor(std::span<const Volume> volumes);

}  // namespace alzhinet::data
