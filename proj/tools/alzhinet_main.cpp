#include "alzhinet/battery.hpp"
#include "alzhinet/config.hpp"
#include "alzhinet/errors.hpp"
#include "alzhinet/robustness.hpp"
#include "alzhinet/training.hpp"
#include "alzhinet/version.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

namespace fs = std::filesystem;
using namespace alzhinet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitVerification = 5;

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
}

/// Exclusive claim on an output directory: config echo before work, lockfile
/// for the run's duration.
class OutputDir {
 public:
  OutputDir(const cli::RunConfig& cfg, const std::string& override_dir) {
    dir_ = override_dir.empty() ? fs::path(cfg.output_dir) : fs::path(override_dir);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory " + dir_.string());
    lock_ = dir_ / ".alzhinet.lock";
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (!f)
      throw DataError("output directory is locked by another run: " + lock_.string());
    std::fclose(f);
    cli::RunConfig echoed = cfg;
    echoed.output_dir = dir_.string();
    std::string resolved = cli::resolved_json(echoed);
    resolved.insert(resolved.rfind("\n}"), ",\n  \"tool_version\": \"" + std::string(kToolVersion) + "\"");
    write_file(dir_ / "resolved_config.json", resolved);
  }
  ~OutputDir() {
    std::error_code ec;
    fs::remove(lock_, ec);
  }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  fs::path lock_;
};

data::Dataset load_dataset(const cli::RunConfig& cfg) {
  data::Dataset raw;
  if (cfg.data.synthetic) {
    raw = data::generate_synthetic(*cfg.data.synthetic);
  } else if (!cfg.data.dir.empty()) {
    int skipped = 0;
    raw = data::load_image_dir(cfg.data.dir, &skipped);
    if (skipped > 0)
      std::cerr << "warning: skipped " << skipped << " undecodable image file(s)\n";
  } else {
    throw ConfigError("config needs data.dir or data.synthetic");
  }
  return data::prepared(raw, cfg.data.resize_h, cfg.data.resize_w);
}

std::pair<data::Dataset, data::Dataset> split_dataset(const cli::RunConfig& cfg,
                                                      const data::Dataset& ds) {
  auto [train, test] = data::split(ds, {cfg.data.train_fraction, true, cli::split_seed(cfg)});
  if (!cfg.data.oversample.empty()) {
    std::map<int, std::size_t> targets;
    for (const auto& [name, count] : cfg.data.oversample) {
      const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), name);
      if (it == ds.class_names.end())
        throw ConfigError("data.oversample references unknown class '" + name + "'");
      targets[static_cast<int>(it - ds.class_names.begin())] = count;
    }
    train = data::oversample_minority(train, targets, cfg.train.roster, cli::split_seed(cfg) ^ 1);
  }
  return {std::move(train), std::move(test)};
}

int resolve_classes(const cli::RunConfig& cfg, const data::Dataset& ds) {
  if (cfg.model.num_classes == 0) return ds.num_classes();
  if (cfg.model.num_classes != ds.num_classes())
    throw ConfigError("model.num_classes=" + std::to_string(cfg.model.num_classes) +
                      " does not match the data (" + std::to_string(ds.num_classes()) + ")");
  return cfg.model.num_classes;
}

std::unique_ptr<HybridModel> build_model(const cli::RunConfig& cfg, int num_classes) {
  TwoDNetConfig c2;
  c2.num_classes = num_classes;
  c2.width_multiplier = cfg.model.width_multiplier;
  c2.blocks_per_stage = cfg.model.blocks_per_stage;
  ThreeDNetConfig c3;
  c3.num_classes = num_classes;
  c3.width_multiplier = cfg.model.width_multiplier;
  return std::make_unique<HybridModel>(c2, c3, cfg.train.alpha, cfg.train.beta,
                                       cli::init_seed(cfg));
}

bool is_hybrid_checkpoint(const fs::path& path) {
  for (const auto& name : checkpoint_names(path))
    if (name.rfind("2d.", 0) == 0 || name.rfind("3d.", 0) == 0) return true;
  return false;
}

/// Loads either a bare 2D checkpoint or a full hybrid one into the model.
/// Returns true when the checkpoint covered both nets.
bool load_into_model(HybridModel& model, const fs::path& path) {
  if (is_hybrid_checkpoint(path)) {
    load_weights(model.state(), path);
    return true;
  }
  load_weights(model.two_d().state(), path);
  return false;
}

int cmd_train(const cli::RunConfig& cfg, const std::string& out_override) {
  OutputDir out(cfg, out_override);
  data::Dataset all = load_dataset(cfg);
  auto [train_set, test_set] = split_dataset(cfg, all);
  auto model = build_model(cfg, resolve_classes(cfg, all));
  FitReport report = fit(*model, train_set, cfg.train);

  write_file(out.path() / "fit_report.json", fit_report_json(report, cfg.train));
  write_file(out.path() / "fit_epochs.csv", fit_report_csv(report));
  save_weights(model->two_d().state(), out.path() / "model.azwt");
  if (cfg.save_hybrid) save_weights(model->state(), out.path() / "hybrid.azwt");

  std::cout << "trained " << report.stopped_epoch << " epoch(s); best epoch "
            << report.best_epoch << " with validation accuracy " << report.best_val_acc << "\n"
            << "checkpoint: " << (out.path() / "model.azwt").string() << "\n";
  return 0;
}

int cmd_eval(const cli::RunConfig& cfg, const std::string& out_override,
             const std::string& checkpoint, const std::string& head, const std::string& split) {
  OutputDir out(cfg, out_override);
  data::Dataset all = load_dataset(cfg);
  auto [train_set, test_set] = split_dataset(cfg, all);
  const data::Dataset& target =
      split == "train" ? train_set : (split == "all" ? all : test_set);

  auto model = build_model(cfg, resolve_classes(cfg, all));
  const bool hybrid_ckpt = load_into_model(*model, checkpoint);
  if (head == "hybrid" && !hybrid_ckpt)
    throw CheckpointError("the hybrid head needs a hybrid checkpoint (train.save_hybrid)");

  metrics::MetricsReport report =
      head == "hybrid"
          ? evaluate(*model, target, EvalHead::hybrid, cfg.train.roster, cfg.seed)
          : evaluate(model->two_d(), target);

  write_file(out.path() / "metrics.json", metrics::to_json(report));
  write_file(out.path() / "metrics.csv", metrics::to_csv(report, fs::path(checkpoint).stem().string()));
  write_file(out.path() / "confusion.csv", metrics::confusion_csv(report.confusion, report.class_names));
  std::cout << "accuracy " << report.accuracy << " on " << target.size() << " sample(s)\n";
  return 0;
}

int cmd_perturb(const cli::RunConfig& cfg, const std::string& out_override,
                const std::vector<std::string>& checkpoints,
                const std::vector<std::string>& family_filter, const std::string& head) {
  OutputDir out(cfg, out_override);
  data::Dataset all = load_dataset(cfg);
  auto [train_set, test_set] = split_dataset(cfg, all);
  const int num_classes = resolve_classes(cfg, all);

  std::vector<std::unique_ptr<HybridModel>> models;
  std::vector<robust::NamedModel> named;
  for (const auto& checkpoint : checkpoints) {
    models.push_back(build_model(cfg, num_classes));
    HybridModel& model = *models.back();
    const bool hybrid_ckpt = load_into_model(model, checkpoint);
    if (head == "hybrid" && !hybrid_ckpt)
      throw CheckpointError("the hybrid head needs a hybrid checkpoint: " + checkpoint);
    const std::string name = fs::path(checkpoint).stem().string();
    if (head == "hybrid") {
      named.push_back({name, [&model, &cfg](const data::Dataset& ds) {
                         return evaluate(model, ds, EvalHead::hybrid, cfg.train.roster, cfg.seed);
                       }});
    } else {
      named.push_back({name, [&model](const data::Dataset& ds) {
                         return evaluate(model.two_d(), ds);
                       }});
    }
  }

  std::vector<robust::PerturbationGrid> grids;
  const auto wanted = family_filter.empty() ? cfg.sweep.families : family_filter;
  for (auto& grid : robust::default_grids()) {
    const std::string name = robust::family_name(grid.family);
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end())
      continue;
    if (auto it = cfg.sweep.level_overrides.find(name); it != cfg.sweep.level_overrides.end())
      grid.levels = it->second;
    grids.push_back(std::move(grid));
  }
  if (grids.empty()) throw ConfigError("family filter leaves no perturbation grids");

  robust::SweepReport report = robust::sweep(named, test_set, grids, cli::sweep_seed(cfg));
  robust::TrendSummary trends = robust::trend_summary(report);
  write_file(out.path() / "sweep.csv", robust::sweep_csv(report));
  write_file(out.path() / "sweep.json", robust::sweep_json(report));
  write_file(out.path() / "trends.json", robust::trend_json(trends));
  std::cout << "swept " << grids.size() << " families over " << named.size() << " model(s), "
            << report.rows.size() << " rows\n";
  return 0;
}

int cmd_augment_preview(const cli::RunConfig& cfg, const std::string& out_override,
                        const std::string& image_path) {
  OutputDir out(cfg, out_override);
  Image img = data::replicate_channels(read_pnm(image_path));
  Volume vol = aug::build_volume(img, cfg.train.roster, {cfg.seed, 0, 0, 0});
  for (int d = 0; d < vol.depth; ++d) {
    char name[32];
    std::snprintf(name, sizeof(name), "slice_%02d.ppm", d);
    write_pnm(out.path() / name, vol.slice(d));
  }
  std::cout << "wrote " << vol.depth << " slice(s) to " << out.path().string() << "\n";
  return 0;
}

int cmd_gradcheck(const cli::RunConfig& cfg, const std::string& out_override, int trials,
                  std::optional<double> threshold) {
  OutputDir out(cfg, out_override);
  const double primitive_threshold = threshold.value_or(1e-6);
  const double end_to_end_threshold = threshold.value_or(1e-4);
  BatteryReport report =
      run_gradient_battery(trials, primitive_threshold, end_to_end_threshold, cfg.seed);
  std::cout << battery_text(report);
  write_file(out.path() / "gradcheck.json", battery_json(report));
  if (!report.all_pass) {
    std::cerr << "failing checks:";
    for (const auto& check : report.checks)
      if (!check.pass) std::cerr << ' ' << check.name;
    std::cerr << "\n";
    return kExitVerification;
  }
  return 0;
}

int cmd_synth(const cli::RunConfig& cfg, const std::string& out_override) {
  if (!cfg.data.synthetic) throw ConfigError("synth needs data.synthetic in the config");
  OutputDir out(cfg, out_override);
  data::Dataset ds = data::generate_synthetic(*cfg.data.synthetic);
  data::write_image_dir(ds, out.path() / "dataset");
  std::cout << "wrote " << ds.size() << " image(s) across " << ds.num_classes()
            << " class(es) to " << (out.path() / "dataset").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid 2D/3D convolutional training pipeline"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string config_path, output_dir, image_path, checkpoint;
  std::string head = "2d", split = "test";
  std::vector<std::string> checkpoints, families;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> threshold;
  int trials = 100;

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required(config_required);
    sub->add_option("--seed", seed_override, "overrides the config seed");
    sub->add_option("--output", output_dir, "overrides the config output_dir");
  };

  CLI::App* train = app.add_subcommand("train", "fit the hybrid model and save the 2D weights");
  add_common(train);

  CLI::App* eval = app.add_subcommand("eval", "metrics for a checkpoint on the held-out split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "AZWT checkpoint")->required();
  eval->add_option("--head", head, "2d | hybrid")->check(CLI::IsMember({"2d", "hybrid"}));
  eval->add_option("--split", split, "test | train | all")
      ->check(CLI::IsMember({"test", "train", "all"}));

  CLI::App* perturb = app.add_subcommand("perturb", "corruption sweep over frozen checkpoints");
  add_common(perturb);
  perturb->add_option("--checkpoint", checkpoints, "AZWT checkpoint (repeatable)")
      ->required()
      ->take_all();
  perturb->add_option("--families", families, "subset of perturbation families")->delimiter(',');
  perturb->add_option("--head", head, "2d | hybrid")->check(CLI::IsMember({"2d", "hybrid"}));

  CLI::App* preview = app.add_subcommand("augment-preview", "write each roster slice as an image");
  add_common(preview);
  preview->add_option("--image", image_path, "PGM/PPM input image")->required();

  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "gradient verification battery");
  add_common(gradcheck_cmd, /*config_required=*/false);
  gradcheck_cmd->add_option("--trials", trials, "randomized trials per primitive");
  gradcheck_cmd->add_option("--threshold", threshold, "override both pass thresholds");

  CLI::App* synth = app.add_subcommand("synth", "materialize the synthetic dataset as a PGM tree");
  add_common(synth);

  CLI11_PARSE(app, argc, argv);

  try {
    cli::RunConfig cfg;
    if (!config_path.empty()) cfg = cli::load_config(config_path);
    if (seed_override) {
      cfg.seed = *seed_override;
      cfg.train.seed = *seed_override;
      if (cfg.data.synthetic && cfg.data.synthetic->seed == 0) cfg.data.synthetic->seed = *seed_override;
    }

    if (train->parsed()) return cmd_train(cfg, output_dir);
    if (eval->parsed()) return cmd_eval(cfg, output_dir, checkpoint, head, split);
    if (perturb->parsed()) return cmd_perturb(cfg, output_dir, checkpoints, families, head);
    if (preview->parsed()) return cmd_augment_preview(cfg, output_dir, image_path);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(cfg, output_dir, trials, threshold);
    if (synth->parsed()) return cmd_synth(cfg, output_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
