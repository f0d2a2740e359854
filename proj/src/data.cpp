#include "alzhinet/data.hpp"

#include "alzhinet/errors.hpp"
#include "alzhinet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alzhinet::data {

namespace fs = std::filesystem;

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int label : labels) counts[static_cast<std::size_t>(label)]++;
  return counts;
}

Dataset load_image_dir(const fs::path& root, int* skipped) {
  if (!fs::is_directory(root)) throw DataError("data root is not a directory: " + root.string());

  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2)
    throw DataError("data root needs at least two class directories: " + root.string());

  Dataset ds;
  ds.class_names = class_dirs;
  ds.provenance = root.string();
  int skip_count = 0;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / class_dirs[c])) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t loaded = 0;
    for (const auto& file : files) {
      try {
        ds.images.push_back(read_pnm(file));
        ds.labels.push_back(static_cast<int>(c));
        ++loaded;
      } catch (const DataError&) {
        ++skip_count;  // undecodable file: skip, keep counting
      }
    }
    if (loaded == 0)
      throw DataError("class directory has no decodable image: " + (root / class_dirs[c]).string());
  }
  if (skipped) *skipped = skip_count;
  return ds;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ParamError("resize target must be at least 1x1");
  if (out_h == img.height && out_w == img.width) return img;

  Image out(img.channels, out_h, out_w);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) + tx * (img.at(c, y0, x1) - img.at(c, y0, x0));
        const double bot = img.at(c, y1, x0) + tx * (img.at(c, y1, x1) - img.at(c, y1, x0));
        out.at(c, y, x) = std::clamp(top + ty * (bot - top), 0.0, 1.0);
      }
    }
  }
  return out;
}

Image replicate_channels(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw DataError("replicate_channels expects 1 or 3 channels");
  Image out(3, img.height, img.width);
  const Index plane = static_cast<Index>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) out.pix.segment(c * plane, plane) = img.pix;
  return out;
}

Dataset prepared(const Dataset& ds, int h, int w) {
  Dataset out;
  out.labels = ds.labels;
  out.class_names = ds.class_names;
  out.provenance = ds.provenance;
  out.images.reserve(ds.images.size());
  for (const Image& img : ds.images) out.images.push_back(replicate_channels(resize_bilinear(img, h, w)));
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
    throw ParamError("train_fraction must be in (0,1)");
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < 2)
      throw DataError("class '" + ds.class_names[c] + "' has fewer than two samples");

  std::vector<std::size_t> train_idx, test_idx;
  if (spec.stratified) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] == static_cast<int>(c)) members.push_back(i);
      RngStream rng(splitmix64_mix(spec.seed) ^ splitmix64_mix(0x51a7 + c));
      rng.shuffle(members);
      const auto take =
          static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(members.size())));
      for (std::size_t i = 0; i < members.size(); ++i)
        (i < take ? train_idx : test_idx).push_back(members[i]);
    }
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0u);
    RngStream rng(splitmix64_mix(spec.seed));
    rng.shuffle(all);
    const auto take =
        static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(all.size())));
    train_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
    test_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(take), all.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take_subset = [&](const std::vector<std::size_t>& idx) {
    Dataset out;
    out.class_names = ds.class_names;
    out.provenance = ds.provenance;
    for (std::size_t i : idx) {
      out.images.push_back(ds.images[i]);
      out.labels.push_back(ds.labels[i]);
    }
    return out;
  };
  return {take_subset(train_idx), take_subset(test_idx)};
}

Dataset oversample_minority(const Dataset& train, const std::map<int, std::size_t>& target_counts,
                            const std::vector<aug::AugSpec>& roster, std::uint64_t seed) {
  if (roster.empty()) throw ParamError("oversampling needs a non-empty augmentation roster");
  const auto counts = train.class_counts();
  Dataset out = train;
  std::int64_t duplicate_counter = 0;
  for (const auto& [cls, target] : target_counts) {
    if (cls < 0 || cls >= train.num_classes()) throw IndexError("oversample target for unknown class");
    const std::size_t current = counts[static_cast<std::size_t>(cls)];
    if (target < current)
      throw ParamError("oversample target " + std::to_string(target) + " below current count " +
                       std::to_string(current) + " for class " + train.class_names[static_cast<std::size_t>(cls)]);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train.labels[i] == cls) members.push_back(i);

    RngStream pick(splitmix64_mix(seed) ^ splitmix64_mix(0x0b5e55ull + static_cast<std::uint64_t>(cls)));
    for (std::size_t d = current; d < target; ++d) {
      const std::size_t src = members[pick.next_below(members.size())];
      const std::size_t aug_idx = pick.next_below(roster.size());
      const aug::SeedContext ctx{seed, /*epoch=*/-1, duplicate_counter++,
                                 static_cast<std::int64_t>(aug_idx)};
      out.images.push_back(aug::apply(roster[aug_idx], train.images[src], ctx));
      out.labels.push_back(cls);
    }
  }
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ParamError("synthetic spec needs at least two classes");
  if (spec.per_class < 1) throw ParamError("synthetic per_class must be at least 1");

  Dataset ds;
  ds.provenance = "synthetic";
  for (int c = 0; c < spec.num_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));

  const int s = spec.image_size;
  const double pi = 3.14159265358979323846;
  for (int c = 0; c < spec.num_classes; ++c) {
    // One orientation and frequency per class; per-sample phase jitter and
    // pixel noise keep samples distinct without washing out the centroid.
    const double theta = pi * c / spec.num_classes;
    const double freq = 2.0 + 1.5 * c;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    for (int k = 0; k < spec.per_class; ++k) {
      RngStream rng(splitmix64_mix(spec.seed) ^
                    splitmix64_mix(0x5e3d + static_cast<std::uint64_t>(c) * 100003 +
                                   static_cast<std::uint64_t>(k)));
      const double phase = rng.uniform(-0.4, 0.4);
      const double amp = 0.32 + rng.uniform(-0.04, 0.04);
      Image img(1, s, s);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          const double u = (cos_t * x + sin_t * y) / s;
          double v = 0.5 + amp * std::sin(2.0 * pi * freq * u + phase);
          v += spec.noise_sigma * rng.normal();
          img.at(0, y, x) = std::clamp(v, 0.0, 1.0);
        }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void write_image_dir(const Dataset& ds, const fs::path& root) {
  fs::create_directories(root);
  std::vector<int> counters(ds.class_names.size(), 0);
  for (const auto& name : ds.class_names) fs::create_directories(root / name);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.%s", counters[c]++,
                  ds.images[i].channels == 1 ? "pgm" : "ppm");
    write_pnm(root / ds.class_names[c] / name, ds.images[i]);
  }
}

Tensor images_to_tensor(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("empty batch");
  const Image& first = ds.images[indices[0]];
  Tensor t({static_cast<Index>(indices.size()), first.channels, first.height, first.width});
  const Index per = first.size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Image& img = ds.images[indices[b]];
    if (img.size() != per) throw ShapeError("batch images must share their shape");
    t.array().segment(static_cast<Index>(b) * per, per) = img.pix;
  }
  return t;
}

Tensor volumes_to_tensor(std::span<const Volume> volumes) {
  if (volumes.empty()) throw DataError("empty volume batch");
  const Volume& v0 = volumes[0];
  Tensor t({static_cast<Index>(volumes.size()), v0.channels, v0.depth, v0.height, v0.width});
  const Index plane = static_cast<Index>(v0.height) * v0.width;
  for (std::size_t b = 0; b < volumes.size(); ++b) {
    const Volume& v = volumes[b];
    if (v.vox.size() != v0.vox.size()) throw ShapeError("batch volumes must share their shape");
    // [D][C][H][W] storage to [C][D][H][W] model layout.
    for (int c = 0; c < v.channels; ++c)
      for (int d = 0; d < v.depth; ++d) {
        const Index src = (static_cast<Index>(d) * v.channels + c) * plane;
        const Index dst = ((static_cast<Index>(b) * v.channels + c) * v.depth + d) * plane;
        t.array().segment(dst, plane) = v.vox.segment(src, plane);
      }
  }
  return t;
}

}  // namespace alzhinet::data
