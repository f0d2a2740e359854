#include "alzhinet/data.hpp"
#include "alzhinet/errors.hpp"
#include "alzhinet/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace alzhinet;
using namespace alzhinet::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("alzhinet_data_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Image gradient_image(int c, int h, int w) {
  Image img(c, h, w);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(ch, y, x) = (y * w + x) % 256 / 255.0;
  return img;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("pnm round trip and ingestion") {
  TempDir tmp;
  fs::create_directories(tmp.path / "a");
  fs::create_directories(tmp.path / "b");
  for (int i = 0; i < 3; ++i)
    write_pnm(tmp.path / "a" / ("g" + std::to_string(i) + ".pgm"), gradient_image(1, 6, 5));
  write_pnm(tmp.path / "b" / "c0.ppm", gradient_image(3, 6, 5));
  write_pnm(tmp.path / "b" / "c1.ppm", gradient_image(3, 6, 5));

  Dataset ds = load_image_dir(tmp.path);
  CHECK(ds.size() == 5);
  CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.class_counts() == std::vector<std::size_t>{3, 2});

  SUBCASE("byte mapping divides by maxval") {
    std::ofstream out(tmp.path / "a" / "half.pgm", std::ios::binary);
    out << "P5\n1 1\n255\n";
    out.put(static_cast<char>(128));
    out.close();
    Image img = read_pnm(tmp.path / "a" / "half.pgm");
    CHECK(img.at(0, 0, 0) == 128.0 / 255.0);
  }
  SUBCASE("ascii variants decode identically") {
    std::ofstream out(tmp.path / "ascii.pgm");
    out << "P2\n# comment\n2 2\n255\n0 128\n255 64\n";
    out.close();
    Image img = read_pnm(tmp.path / "ascii.pgm");
    CHECK(img.at(0, 0, 1) == 128.0 / 255.0);
    CHECK(img.at(0, 1, 0) == 1.0);
  }
  SUBCASE("undecodable files are skipped with a count") {
    std::ofstream(tmp.path / "a" / "junk.pgm") << "not a pnm";
    int skipped = 0;
    Dataset with_junk = load_image_dir(tmp.path, &skipped);
    CHECK(skipped == 1);
    CHECK(with_junk.size() == 5);
  }
  SUBCASE("empty class is a hard error") {
    fs::create_directories(tmp.path / "c");
    CHECK_THROWS_AS((void)load_image_dir(tmp.path), DataError);
  }
}

TEST_CASE("ingestion totals on a large imbalanced tree") {
  // Heavily imbalanced four-class tree: 896 / 64 / 3200 / 2240 images.
  TempDir tmp;
  const std::vector<std::pair<std::string, int>> classes = {
      {"mild", 896}, {"moderate", 64}, {"non", 3200}, {"very_mild", 2240}};
  Image tiny = Image::constant(1, 2, 2, 0.5);
  for (const auto& [name, count] : classes) {
    fs::create_directories(tmp.path / name);
    for (int i = 0; i < count; ++i)
      write_pnm(tmp.path / name / ("i" + std::to_string(i) + ".pgm"), tiny);
  }
  Dataset ds = load_image_dir(tmp.path);
  CHECK(ds.size() == 6400);
  CHECK(ds.class_counts() == std::vector<std::size_t>{896, 64, 3200, 2240});
  CHECK(ds.class_names == std::vector<std::string>{"mild", "moderate", "non", "very_mild"});
}

TEST_CASE("resize_bilinear") {
  SUBCASE("same size is the identity") {
    Image img = gradient_image(3, 7, 9);
    Image out = resize_bilinear(img, 7, 9);
    CHECK((out.pix - img.pix).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("constant stays constant") {
    Image img = Image::constant(1, 5, 5, 0.7);
    Image out = resize_bilinear(img, 13, 3);
    CHECK((out.pix == 0.7).all());
  }
  SUBCASE("2x2 checkerboard to 4x4 matches the naive resampler") {
    Image img(1, 2, 2);
    img.at(0, 0, 0) = 0.0;
    img.at(0, 0, 1) = 1.0;
    img.at(0, 1, 0) = 1.0;
    img.at(0, 1, 1) = 0.0;
    Image out = resize_bilinear(img, 4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        // align-corners-false source coordinates, clamped, two-lerp sample
        double fy = std::clamp((y + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        double fx = std::clamp((x + 0.5) * 0.5 - 0.5, 0.0, 1.0);
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        const int y1 = std::min(y0 + 1, 1), x1 = std::min(x0 + 1, 1);
        const double ty = fy - y0, tx = fx - x0;
        const double top = img.at(0, y0, x0) + tx * (img.at(0, y0, x1) - img.at(0, y0, x0));
        const double bot = img.at(0, y1, x0) + tx * (img.at(0, y1, x1) - img.at(0, y1, x0));
        CHECK(out.at(0, y, x) == doctest::Approx(top + ty * (bot - top)).epsilon(1e-12));
      }
  }
}

TEST_CASE("replicate_channels") {
  Image gray = gradient_image(1, 4, 4);
  Image rgb = replicate_channels(gray);
  CHECK(rgb.channels == 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(rgb.at(0, y, x) == gray.at(0, y, x));
      CHECK(rgb.at(1, y, x) == gray.at(0, y, x));
      CHECK(rgb.at(2, y, x) == gray.at(0, y, x));
    }
  CHECK(std::abs(rgb.pix.mean() - gray.pix.mean()) < 1e-15);

  Image already = gradient_image(3, 4, 4);
  Image same = replicate_channels(already);
  CHECK((same.pix == already.pix).all());
}

TEST_CASE("split") {
  SUBCASE("single class fraction arithmetic") {
    SyntheticSpec spec;
    spec.num_classes = 2;
    spec.per_class = 100;
    spec.image_size = 8;
    Dataset ds = generate_synthetic(spec);
    auto [train, test] = split(ds, {0.7, true, 3});
    CHECK(train.class_counts() == std::vector<std::size_t>{70, 70});
    CHECK(test.class_counts() == std::vector<std::size_t>{30, 30});
  }
  SUBCASE("a class of 243 splits 170/73") {
    Dataset ds;
    ds.class_names = {"cn", "ad"};
    for (int i = 0; i < 243; ++i) {
      ds.images.push_back(Image::constant(1, 2, 2, 0.1));
      ds.labels.push_back(0);
    }
    for (int i = 0; i < 10; ++i) {
      ds.images.push_back(Image::constant(1, 2, 2, 0.9));
      ds.labels.push_back(1);
    }
    auto [train, test] = split(ds, {0.7, true, 11});
    CHECK(train.class_counts()[0] == 170);
    CHECK(test.class_counts()[0] == 73);
  }
  SUBCASE("disjoint, exhaustive, deterministic") {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.per_class = 21;
    spec.image_size = 8;
    spec.seed = 5;
    Dataset ds = generate_synthetic(spec);
    auto [train1, test1] = split(ds, {0.7, true, 9});
    auto [train2, test2] = split(ds, {0.7, true, 9});
    CHECK(train1.size() + test1.size() == ds.size());
    CHECK(train1.size() == train2.size());
    for (std::size_t i = 0; i < train1.size(); ++i)
      CHECK((train1.images[i].pix == train2.images[i].pix).all());
    // Stratification within one sample of the target.
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(std::abs(static_cast<double>(train1.class_counts()[c]) - 0.7 * 21.0) <= 1.0);
  }
  SUBCASE("class of one is an error") {
    Dataset ds;
    ds.class_names = {"a", "b"};
    ds.images.push_back(Image::constant(1, 2, 2, 0.5));
    ds.labels.push_back(0);
    ds.images.push_back(Image::constant(1, 2, 2, 0.5));
    ds.labels.push_back(1);
    ds.images.push_back(Image::constant(1, 2, 2, 0.5));
    ds.labels.push_back(1);
    CHECK_THROWS_AS((void)split(ds, {0.5, true, 0}), DataError);
  }
}

TEST_CASE("oversample_minority") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 45;
  spec.image_size = 12;
  spec.seed = 7;
  Dataset train = generate_synthetic(spec);

  SUBCASE("target equal to current is the identity") {
    Dataset out = oversample_minority(train, {{0, 45}}, aug::default_roster(), 1);
    CHECK(out.size() == train.size());
  }
  SUBCASE("deficit is filled with augmented duplicates") {
    Dataset out = oversample_minority(train, {{0, 480}}, aug::default_roster(), 1);
    CHECK(out.class_counts()[0] == 480);
    CHECK(out.class_counts()[1] == 45);
    // Duplicates differ bitwise from every original class member.
    for (std::size_t d = train.size(); d < out.size(); ++d) {
      bool equals_source = false;
      for (std::size_t i = 0; i < train.size(); ++i)
        if (train.labels[i] == out.labels[d] &&
            train.images[i].pix.size() == out.images[d].pix.size() &&
            (train.images[i].pix == out.images[d].pix).all())
          equals_source = true;
      CHECK(!equals_source);
    }
  }
  SUBCASE("deterministic under seed") {
    Dataset a = oversample_minority(train, {{1, 90}}, aug::default_roster(), 4);
    Dataset b = oversample_minority(train, {{1, 90}}, aug::default_roster(), 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a.images[i].pix == b.images[i].pix).all());
  }
  SUBCASE("target below current is rejected") {
    CHECK_THROWS_AS((void)oversample_minority(train, {{0, 10}}, aug::default_roster(), 1),
                    ParamError);
  }
}

TEST_CASE("generate_synthetic") {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.per_class = 50;
  spec.image_size = 32;
  spec.seed = 123;

  Dataset ds = generate_synthetic(spec);
  CHECK(ds.size() == 200);
  CHECK(ds.class_counts() == std::vector<std::size_t>{50, 50, 50, 50});

  SUBCASE("bitwise deterministic") {
    Dataset again = generate_synthetic(spec);
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK((ds.images[i].pix == again.images[i].pix).all());
  }
  SUBCASE("nearest centroid on raw pixels clears the separability floor") {
    auto [train, test] = split(ds, {0.7, true, 1});
    std::vector<Array> centroids(4, Array::Zero(32 * 32));
    std::vector<int> counts(4, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      centroids[static_cast<std::size_t>(train.labels[i])] += train.images[i].pix;
      counts[static_cast<std::size_t>(train.labels[i])]++;
    }
    for (int c = 0; c < 4; ++c) centroids[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
    int correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < 4; ++c) {
        const double d = (test.images[i].pix - centroids[static_cast<std::size_t>(c)]).square().sum();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      correct += (best == test.labels[i]);
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) > 0.6);
  }
  SUBCASE("round-trips through the directory loader") {
    TempDir tmp;
    write_image_dir(ds, tmp.path);
    Dataset loaded = load_image_dir(tmp.path);
    CHECK(loaded.size() == ds.size());
    CHECK(loaded.class_counts() == ds.class_counts());
    CHECK(loaded.class_names == ds.class_names);
  }
}

TEST_CASE("batch assembly") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.image_size = 8;
  Dataset ds = prepared(generate_synthetic(spec), 8, 8);

  const std::vector<std::size_t> idx = {0, 4, 2};
  Tensor batch = images_to_tensor(ds, idx);
  CHECK(batch.shape() == std::vector<Index>{3, 3, 8, 8});
  CHECK(batch.at({1, 0, 0, 0}) == ds.images[4].at(0, 0, 0));
  CHECK(batch.at({2, 2, 3, 5}) == ds.images[2].at(2, 3, 5));

  std::vector<Volume> vols;
  vols.push_back(aug::build_volume(ds.images[0], aug::default_roster(3), {1, 0, 0, 0}));
  vols.push_back(aug::build_volume(ds.images[1], aug::default_roster(3), {1, 0, 1, 0}));
  Tensor vt = volumes_to_tensor(vols);
  CHECK(vt.shape() == std::vector<Index>{2, 3, 3, 8, 8});
  // [b, c, d, y, x] pulls from slice d, channel c.
  CHECK(vt.at({1, 2, 1, 4, 4}) == vols[1].slice(1).at(2, 4, 4));
}

TEST_SUITE_END();
