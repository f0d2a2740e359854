#pragma once

#include "alzhinet/tensor.hpp"

#include <filesystem>
#include <string>

namespace alzhinet {

/// Channel-major 2D image with pixel values in [0,1]; 1 or 3 channels.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  Array pix;  // size channels*height*width

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w), pix(Array::Zero(c * h * w)) {}

  double& at(int c, int y, int x) { return pix[(static_cast<Index>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return pix[(static_cast<Index>(c) * height + y) * width + x];
  }
  Index size() const { return pix.size(); }

  static Image constant(int c, int h, int w, double v) {
    Image img(c, h, w);
    img.pix.setConstant(v);
    return img;
  }
};

/// Depth-stack of augmented images: slice d is one augmentation of the same
/// source image. Stored depth-major [D][C][H][W].
struct Volume {
  int depth = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  Array vox;

  Volume() = default;
  Volume(int d, int c, int h, int w)
      : depth(d), channels(c), height(h), width(w), vox(Array::Zero(Index(d) * c * h * w)) {}

  Image slice(int d) const {
    Image img(channels, height, width);
    img.pix = vox.segment(static_cast<Index>(d) * channels * height * width,
                          static_cast<Index>(channels) * height * width);
    return img;
  }
  void set_slice(int d, const Image& img) {
    vox.segment(static_cast<Index>(d) * channels * height * width,
                static_cast<Index>(channels) * height * width) = img.pix;
  }
};

// Portable anymap I/O: PGM (P2/P5) for grayscale, PPM (P3/P6) for color,
// 8-bit maxval. The only image formats the project reads or writes.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace alzhinet
