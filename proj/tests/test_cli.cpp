// Exercises the installed binary end to end through std::system; the binary
// path arrives via the ALZHINET_BIN compile definition.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("alzhinet_cli_" + std::to_string(::getpid()) + "_" +
                                       std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  fs::path file(const std::string& name) const { return dir / name; }
};

int run(const std::string& args) {
  const std::string cmd = std::string(ALZHINET_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_config(const fs::path& path, const std::string& out_dir, int max_epochs = 2) {
  std::ofstream out(path);
  out << R"({
  "seed": 21,
  "output_dir": ")" << out_dir
      << R"(",
  "data": {"synthetic": {"num_classes": 3, "per_class": 9, "image_size": 16}, "resize": [16, 16], "train_fraction": 0.667},
  "model": {"width_multiplier": 0.125},
  "train": {"batch_size": 8, "max_epochs": )"
      << max_epochs << R"(, "patience": 2, "val_fraction": 0.15, "save_hybrid": true},
  "augment": {"roster_size": 3}
})";
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("train, eval and perturb round trip") {
  Workspace ws;
  write_config(ws.file("cfg.json"), (ws.dir / "train_out").string());
  REQUIRE(run("train --config " + ws.file("cfg.json").string()) == 0);
  CHECK(fs::exists(ws.dir / "train_out" / "model.azwt"));
  CHECK(fs::exists(ws.dir / "train_out" / "hybrid.azwt"));
  CHECK(fs::exists(ws.dir / "train_out" / "fit_report.json"));
  CHECK(fs::exists(ws.dir / "train_out" / "fit_epochs.csv"));
  CHECK(fs::exists(ws.dir / "train_out" / "resolved_config.json"));
  CHECK(!fs::exists(ws.dir / "train_out" / ".alzhinet.lock"));  // released

  SUBCASE("determinism: identical run, identical bytes") {
    write_config(ws.file("cfg2.json"), (ws.dir / "train_out2").string());
    REQUIRE(run("train --config " + ws.file("cfg2.json").string()) == 0);
    CHECK(slurp(ws.dir / "train_out" / "fit_report.json") ==
          slurp(ws.dir / "train_out2" / "fit_report.json"));
    CHECK(slurp(ws.dir / "train_out" / "model.azwt") ==
          slurp(ws.dir / "train_out2" / "model.azwt"));
  }
  SUBCASE("eval writes the metrics trio") {
    REQUIRE(run("eval --config " + ws.file("cfg.json").string() + " --checkpoint " +
                (ws.dir / "train_out" / "model.azwt").string() + " --output " +
                (ws.dir / "eval_out").string()) == 0);
    CHECK(fs::exists(ws.dir / "eval_out" / "metrics.json"));
    CHECK(fs::exists(ws.dir / "eval_out" / "metrics.csv"));
    CHECK(fs::exists(ws.dir / "eval_out" / "confusion.csv"));
  }
  SUBCASE("eval with the hybrid head needs the hybrid checkpoint") {
    CHECK(run("eval --config " + ws.file("cfg.json").string() + " --head hybrid --checkpoint " +
              (ws.dir / "train_out" / "model.azwt").string() + " --output " +
              (ws.dir / "eval_hybrid_bad").string()) == 4);
    CHECK(run("eval --config " + ws.file("cfg.json").string() + " --head hybrid --checkpoint " +
              (ws.dir / "train_out" / "hybrid.azwt").string() + " --output " +
              (ws.dir / "eval_hybrid_ok").string()) == 0);
  }
  SUBCASE("perturb writes table-shaped csv with one family") {
    REQUIRE(run("perturb --config " + ws.file("cfg.json").string() + " --checkpoint " +
                (ws.dir / "train_out" / "model.azwt").string() +
                " --families gaussian_noise --output " + (ws.dir / "sweep_out").string()) == 0);
    const std::string csv = slurp(ws.dir / "sweep_out" / "sweep.csv");
    CHECK(csv.find("family,level,model,accuracy,precision,recall,f1,specificity,auc\n") == 0);
    CHECK(csv.find("clean,0,model,") != std::string::npos);
    // clean + 5 gaussian levels + header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(fs::exists(ws.dir / "sweep_out" / "trends.json"));
  }
}

TEST_CASE("exit codes") {
  Workspace ws;
  SUBCASE("missing data path exits 3 without partial outputs") {
    std::ofstream(ws.file("bad_data.json")) << R"({"data": {"dir": "/nonexistent_path_xyz"}})";
    CHECK(run("train --config " + ws.file("bad_data.json").string() + " --output " +
              (ws.dir / "o1").string()) == 3);
    CHECK(!fs::exists(ws.dir / "o1" / "fit_report.json"));
    CHECK(!fs::exists(ws.dir / "o1" / "model.azwt"));
  }
  SUBCASE("unknown config key exits 2") {
    std::ofstream(ws.file("typo.json")) << R"({"trian": {}})";
    CHECK(run("train --config " + ws.file("typo.json").string()) == 2);
  }
  SUBCASE("corrupt checkpoint exits 4") {
    write_config(ws.file("cfg.json"), (ws.dir / "o2").string());
    std::ofstream(ws.file("junk.azwt")) << "not a checkpoint";
    CHECK(run("eval --config " + ws.file("cfg.json").string() + " --checkpoint " +
              ws.file("junk.azwt").string() + " --output " + (ws.dir / "o3").string()) == 4);
  }
  SUBCASE("locked output directory exits 3") {
    write_config(ws.file("cfg.json"), (ws.dir / "locked").string());
    fs::create_directories(ws.dir / "locked");
    std::ofstream(ws.dir / "locked" / ".alzhinet.lock") << "";
    CHECK(run("train --config " + ws.file("cfg.json").string()) == 3);
  }
  SUBCASE("forced gradcheck threshold exits 5") {
    CHECK(run("gradcheck --trials 1 --threshold 1e-15 --output " + (ws.dir / "gc").string()) == 5);
  }
}

TEST_CASE("synth and augment-preview") {
  Workspace ws;
  write_config(ws.file("cfg.json"), (ws.dir / "synth_out").string());
  REQUIRE(run("synth --config " + ws.file("cfg.json").string()) == 0);
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(ws.dir / "synth_out" / "dataset"))
    if (entry.is_regular_file()) ++files;
  CHECK(files == 27);  // 3 classes x 9 images

  SUBCASE("synth is byte deterministic") {
    write_config(ws.file("cfg2.json"), (ws.dir / "synth_out2").string());
    REQUIRE(run("synth --config " + ws.file("cfg2.json").string()) == 0);
    CHECK(slurp(ws.dir / "synth_out" / "dataset" / "class_0" / "img_00000.pgm") ==
          slurp(ws.dir / "synth_out2" / "dataset" / "class_0" / "img_00000.pgm"));
  }
  SUBCASE("preview writes one slice per roster entry") {
    REQUIRE(run("augment-preview --config " + ws.file("cfg.json").string() + " --image " +
                (ws.dir / "synth_out" / "dataset" / "class_0" / "img_00000.pgm").string() +
                " --output " + (ws.dir / "preview").string()) == 0);
    CHECK(fs::exists(ws.dir / "preview" / "slice_00.ppm"));
    CHECK(fs::exists(ws.dir / "preview" / "slice_02.ppm"));
    CHECK(!fs::exists(ws.dir / "preview" / "slice_03.ppm"));
  }
}

TEST_SUITE_END();
