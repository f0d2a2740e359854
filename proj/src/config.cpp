#include "alzhinet/config.hpp"

#include "alzhinet/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace alzhinet::cli {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& node, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : node.items())
    if (!allowed.contains(key))
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read(const json& node, const char* key, T& out) {
  if (node.contains(key)) node.at(key).get_to(out);
}

aug::AugSpec parse_aug_entry(const json& entry, const std::string& where) {
  if (entry.is_string()) {
    // Bare kind name: the default magnitude for that kind.
    const aug::Kind kind = aug::kind_from_name(entry.get<std::string>());
    for (const auto& spec : aug::default_roster())
      if (spec.kind == kind) return spec;
    throw ConfigError("unreachable: default roster covers every kind");
  }
  if (!entry.is_object()) throw ConfigError(where + " entries must be names or objects");
  std::string kind_name = entry.value("kind", "");
  if (kind_name.empty()) throw ConfigError(where + " entry is missing 'kind'");
  const aug::Kind kind = aug::kind_from_name(kind_name);

  auto num = [&](const char* key, double fallback) { return entry.value(key, fallback); };
  aug::AugSpec spec{kind};
  std::set<std::string> allowed = {"kind"};
  switch (kind) {
    case aug::Kind::elastic:
      spec = aug::AugSpec::elastic(num("alpha", 8.0), num("sigma", 4.0));
      allowed.insert({"alpha", "sigma"});
      break;
    case aug::Kind::invert:
      spec = aug::AugSpec::invert();
      break;
    case aug::Kind::sharpness:
      spec = aug::AugSpec::sharpness(num("factor", 2.0));
      allowed.insert("factor");
      break;
    case aug::Kind::salt_pepper:
      spec = aug::AugSpec::salt_pepper(num("amount", 0.01));
      allowed.insert("amount");
      break;
    case aug::Kind::brightness:
      spec = aug::AugSpec::brightness(num("delta", 0.1));
      allowed.insert("delta");
      break;
    case aug::Kind::color_jitter:
      spec = aug::AugSpec::color_jitter(num("strength", 0.2));
      allowed.insert("strength");
      break;
    case aug::Kind::gaussian_noise:
      spec = aug::AugSpec::gaussian_noise(num("sigma", 0.05));
      allowed.insert("sigma");
      break;
    case aug::Kind::gaussian_blur:
      spec = aug::AugSpec::gaussian_blur(num("sigma", 1.0));
      allowed.insert("sigma");
      break;
    case aug::Kind::occlusion:
      spec = aug::AugSpec::occlusion(num("fraction", 0.04));
      allowed.insert("fraction");
      break;
  }
  reject_unknown_keys(entry, allowed, where);
  spec.validate();
  return spec;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(doc, {"seed", "output_dir", "data", "model", "train", "augment", "sweep"},
                      "");

  RunConfig cfg;
  read(doc, "seed", cfg.seed);
  read(doc, "output_dir", cfg.output_dir);

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    reject_unknown_keys(
        d, {"dir", "synthetic", "resize", "train_fraction", "oversample"}, "data");
    read(d, "dir", cfg.data.dir);
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      reject_unknown_keys(s, {"num_classes", "per_class", "image_size", "noise_sigma", "seed"},
                          "data.synthetic");
      data::SyntheticSpec spec;
      read(s, "num_classes", spec.num_classes);
      read(s, "per_class", spec.per_class);
      read(s, "image_size", spec.image_size);
      read(s, "noise_sigma", spec.noise_sigma);
      spec.seed = cfg.seed;
      read(s, "seed", spec.seed);
      cfg.data.synthetic = spec;
    }
    if (d.contains("resize")) {
      const auto resize = d.at("resize").get<std::vector<int>>();
      if (resize.size() != 2) throw ConfigError("data.resize must be [height, width]");
      cfg.data.resize_h = resize[0];
      cfg.data.resize_w = resize[1];
    }
    read(d, "train_fraction", cfg.data.train_fraction);
    if (d.contains("oversample"))
      d.at("oversample").get_to(cfg.data.oversample);
    if (!cfg.data.dir.empty() && cfg.data.synthetic)
      throw ConfigError("data.dir and data.synthetic are mutually exclusive");
  }

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown_keys(m, {"num_classes", "width_multiplier", "blocks_per_stage"}, "model");
    read(m, "num_classes", cfg.model.num_classes);
    read(m, "width_multiplier", cfg.model.width_multiplier);
    read(m, "blocks_per_stage", cfg.model.blocks_per_stage);
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown_keys(t,
                        {"lambda", "alpha", "beta", "lr", "batch_size", "max_epochs", "patience",
                         "val_fraction", "loss_mode", "mode", "mse_stop_grad", "lr_plateau",
                         "lr_plateau_patience", "save_hybrid"},
                        "train");
    read(t, "lambda", cfg.train.lambda);
    read(t, "alpha", cfg.train.alpha);
    read(t, "beta", cfg.train.beta);
    read(t, "lr", cfg.train.lr);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "max_epochs", cfg.train.max_epochs);
    read(t, "patience", cfg.train.patience);
    read(t, "val_fraction", cfg.train.val_fraction);
    read(t, "lr_plateau", cfg.train.lr_plateau);
    read(t, "lr_plateau_patience", cfg.train.lr_plateau_patience);
    read(t, "save_hybrid", cfg.save_hybrid);
    if (t.contains("loss_mode")) {
      const auto mode = t.at("loss_mode").get<std::string>();
      if (mode == "multiclass_ce") cfg.train.loss_mode = LossMode::multiclass_ce;
      else if (mode == "binary_ce") cfg.train.loss_mode = LossMode::binary_ce;
      else throw ConfigError("train.loss_mode must be 'multiclass_ce' or 'binary_ce'");
    }
    if (t.contains("mode")) {
      const auto mode = t.at("mode").get<std::string>();
      if (mode == "hybrid") cfg.train.mode = TrainMode::hybrid;
      else if (mode == "2d_only") cfg.train.mode = TrainMode::two_d_only;
      else if (mode == "3d_only") cfg.train.mode = TrainMode::three_d_only;
      else throw ConfigError("train.mode must be 'hybrid', '2d_only' or '3d_only'");
    }
    if (t.contains("mse_stop_grad")) {
      const auto stop = t.at("mse_stop_grad").get<std::string>();
      if (stop == "none") cfg.train.mse_stop_grad = MseStopGrad::none;
      else if (stop == "2d") cfg.train.mse_stop_grad = MseStopGrad::two_d;
      else if (stop == "3d") cfg.train.mse_stop_grad = MseStopGrad::three_d;
      else throw ConfigError("train.mse_stop_grad must be 'none', '2d' or '3d'");
    }
  }

  if (doc.contains("augment")) {
    const json& a = doc.at("augment");
    reject_unknown_keys(a, {"roster", "roster_size"}, "augment");
    if (a.contains("roster") && a.contains("roster_size"))
      throw ConfigError("augment.roster and augment.roster_size are mutually exclusive");
    if (a.contains("roster_size")) {
      cfg.train.roster = aug::default_roster(a.at("roster_size").get<std::size_t>());
    } else if (a.contains("roster")) {
      cfg.train.roster.clear();
      for (const auto& entry : a.at("roster"))
        cfg.train.roster.push_back(parse_aug_entry(entry, "augment.roster"));
      if (cfg.train.roster.empty()) throw ConfigError("augment.roster must be non-empty");
    }
  }

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    reject_unknown_keys(s, {"families", "head", "levels"}, "sweep");
    read(s, "families", cfg.sweep.families);
    read(s, "head", cfg.sweep.head);
    if (s.contains("levels")) s.at("levels").get_to(cfg.sweep.level_overrides);
    if (cfg.sweep.head != "2d" && cfg.sweep.head != "hybrid")
      throw ConfigError("sweep.head must be '2d' or 'hybrid'");
  }

  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  if (cfg.data.train_fraction <= 0.0 || cfg.data.train_fraction >= 1.0)
    throw ConfigError("data.train_fraction must be in (0,1)");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string resolved_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  auto& d = j["data"];
  if (!cfg.data.dir.empty()) d["dir"] = cfg.data.dir;
  if (cfg.data.synthetic) {
    d["synthetic"] = {{"num_classes", cfg.data.synthetic->num_classes},
                      {"per_class", cfg.data.synthetic->per_class},
                      {"image_size", cfg.data.synthetic->image_size},
                      {"noise_sigma", cfg.data.synthetic->noise_sigma},
                      {"seed", cfg.data.synthetic->seed}};
  }
  d["resize"] = {cfg.data.resize_h, cfg.data.resize_w};
  d["train_fraction"] = cfg.data.train_fraction;
  if (!cfg.data.oversample.empty()) d["oversample"] = cfg.data.oversample;
  j["model"] = {{"num_classes", cfg.model.num_classes},
                {"width_multiplier", cfg.model.width_multiplier},
                {"blocks_per_stage", cfg.model.blocks_per_stage}};
  j["train"] = {
      {"lambda", cfg.train.lambda},
      {"alpha", cfg.train.alpha},
      {"beta", cfg.train.beta},
      {"lr", cfg.train.lr},
      {"batch_size", cfg.train.batch_size},
      {"max_epochs", cfg.train.max_epochs},
      {"patience", cfg.train.patience},
      {"val_fraction", cfg.train.val_fraction},
      {"loss_mode", cfg.train.loss_mode == LossMode::binary_ce ? "binary_ce" : "multiclass_ce"},
      {"mode", cfg.train.mode == TrainMode::hybrid
                   ? "hybrid"
                   : (cfg.train.mode == TrainMode::two_d_only ? "2d_only" : "3d_only")},
      {"mse_stop_grad", cfg.train.mse_stop_grad == MseStopGrad::none
                            ? "none"
                            : (cfg.train.mse_stop_grad == MseStopGrad::two_d ? "2d" : "3d")},
      {"lr_plateau", cfg.train.lr_plateau},
      {"lr_plateau_patience", cfg.train.lr_plateau_patience},
      {"save_hybrid", cfg.save_hybrid},
  };
  auto& roster = j["augment"]["roster"] = nlohmann::ordered_json::array();
  for (const auto& spec : cfg.train.roster) roster.push_back(spec.describe());
  j["sweep"] = {{"families", cfg.sweep.families}, {"head", cfg.sweep.head}};
  if (!cfg.sweep.level_overrides.empty()) j["sweep"]["levels"] = cfg.sweep.level_overrides;
  return j.dump(2) + "\n";
}

std::uint64_t split_seed(const RunConfig& cfg) { return splitmix64_mix(cfg.seed ^ 0x5b117ull); }
std::uint64_t init_seed(const RunConfig& cfg) { return splitmix64_mix(cfg.seed ^ 0x1a17ull); }
std::uint64_t sweep_seed(const RunConfig& cfg) { return splitmix64_mix(cfg.seed ^ 0x53eebull); }

}  // namespace alzhinet::cli
