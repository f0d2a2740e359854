#include "alzhinet/errors.hpp"
#include "alzhinet/image.hpp"

#include <cmath>
#include <fstream>

namespace alzhinet {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

long parse_positive(const std::string& tok, const char* what) {
  try {
    const long v = std::stol(tok);
    if (v <= 0) throw DataError(std::string("non-positive ") + what + " in pnm header");
    return v;
  } catch (const std::invalid_argument&) {
    throw DataError(std::string("malformed ") + what + " in pnm header");
  }
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file " + path.string());

  const std::string magic = next_token(in);
  const bool ascii = (magic == "P2" || magic == "P3");
  const bool binary = (magic == "P5" || magic == "P6");
  if (!ascii && !binary) throw DataError("unsupported pnm magic '" + magic + "' in " + path.string());
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;

  const long w = parse_positive(next_token(in), "width");
  const long h = parse_positive(next_token(in), "height");
  const long maxval = parse_positive(next_token(in), "maxval");
  if (maxval > 255) throw DataError("pnm maxval > 255 is unsupported: " + path.string());

  Image img(channels, static_cast<int>(h), static_cast<int>(w));
  const long count = w * h * channels;
  const double inv = 1.0 / static_cast<double>(maxval);

  if (binary) {
    std::string raw(static_cast<std::size_t>(count), '\0');
    in.read(raw.data(), count);
    if (in.gcount() != count) throw DataError("truncated pnm payload in " + path.string());
    for (long i = 0; i < count; ++i) {
      const int v = static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
      const long y = (i / channels) / w, x = (i / channels) % w, c = i % channels;
      img.at(static_cast<int>(c), static_cast<int>(y), static_cast<int>(x)) = v * inv;
    }
  } else {
    for (long i = 0; i < count; ++i) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw DataError("truncated pnm payload in " + path.string());
      long v = 0;
      try {
        v = std::stol(tok);
      } catch (const std::invalid_argument&) {
        throw DataError("malformed pnm sample in " + path.string());
      }
      if (v < 0 || v > maxval) throw DataError("pnm sample out of range in " + path.string());
      const long y = (i / channels) / w, x = (i / channels) % w, c = i % channels;
      img.at(static_cast<int>(c), static_cast<int>(y), static_cast<int>(x)) =
          static_cast<double>(v) * inv;
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("pnm writer supports 1 or 3 channels, got " + std::to_string(img.channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.size()));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        raw.push_back(static_cast<char>(std::lround(v * 255.0)));
      }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("short write for image file " + path.string());
}

}  // namespace alzhinet
