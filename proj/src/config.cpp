#include "mcdseg/config.hpp"

#include <fstream>
#include <set>

namespace mcdseg {

using nlohmann::json;

namespace {

// Reads j[key] into out when present, wrapping type errors as ConfigError.
template <typename V>
void read(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  std::set<std::string> k(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!k.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

json to_json(const UNetConfig& c) {
  return {{"depth", c.depth},
          {"base_channels", c.base_channels},
          {"kernel_size", c.kernel_size},
          {"dropout_rate", c.dropout_rate},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon},
          {"mc_batch_stats", c.mc_batch_stats}};
}

UNetConfig unet_config_from_json(const json& j, UNetConfig c) {
  reject_unknown(j,
                 {"preset", "depth", "base_channels", "kernel_size", "dropout_rate", "in_channels", "out_channels",
                  "bn_momentum", "bn_epsilon", "mc_batch_stats"},
                 "unet");
  if (j.contains("preset")) {
    const auto p = j.at("preset").get<std::string>();
    if (p == "full") c = UNetConfig::full();
    else if (p == "desk") c = UNetConfig::desk();
    else throw ConfigError("config: unknown unet preset '" + p + "'");
  }
  read(j, "depth", c.depth);
  read(j, "base_channels", c.base_channels);
  read(j, "kernel_size", c.kernel_size);
  read(j, "dropout_rate", c.dropout_rate);
  read(j, "in_channels", c.in_channels);
  read(j, "out_channels", c.out_channels);
  read(j, "bn_momentum", c.bn_momentum);
  read(j, "bn_epsilon", c.bn_epsilon);
  read(j, "mc_batch_stats", c.mc_batch_stats);
  return c;
}

json to_json(const LossConfig& c) {
  json j{{"kind", to_string(c.kind)}, {"smooth_epsilon", c.smooth_epsilon}, {"clamp_epsilon", c.clamp_epsilon}};
  j["beta"] = c.beta ? json(*c.beta) : json(nullptr);
  return j;
}

LossConfig loss_config_from_json(const json& j, LossConfig c) {
  reject_unknown(j, {"kind", "beta", "smooth_epsilon", "clamp_epsilon"}, "loss");
  if (j.contains("kind")) {
    try {
      c.kind = parse_loss_kind(j.at("kind").get<std::string>());
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("beta")) {
    if (j.at("beta").is_null()) c.beta.reset();
    else c.beta = j.at("beta").get<double>();
  }
  read(j, "smooth_epsilon", c.smooth_epsilon);
  read(j, "clamp_epsilon", c.clamp_epsilon);
  return c;
}

json to_json(const AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

AdamConfig adam_config_from_json(const json& j, AdamConfig c) {
  reject_unknown(j, {"learning_rate", "beta1", "beta2", "epsilon"}, "adam");
  read(j, "learning_rate", c.learning_rate);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  return c;
}

json to_json(const PhantomConfig& c) {
  return {{"image_size", c.image_size},
          {"center_jitter", c.center_jitter},
          {"blood_radius", c.blood_radius},
          {"myo_thickness", c.myo_thickness},
          {"background_margin", c.background_margin},
          {"background_control", c.background_control},
          {"background_labeled", c.background_labeled},
          {"myo_control", c.myo_control},
          {"control_cnr", c.control_cnr},
          {"labeled_cnr", c.labeled_cnr},
          {"cnr_spread", c.cnr_spread},
          {"noise_sigma", c.noise_sigma},
          {"noise_scale", c.noise_scale},
          {"true_mbf", c.true_mbf},
          {"inversion_time", c.constants.inversion_time},
          {"t1_blood", c.constants.t1_blood},
          {"m0", c.constants.m0},
          {"partition_coefficient", c.constants.partition_coefficient}};
}

PhantomConfig phantom_config_from_json(const json& j, PhantomConfig c) {
  reject_unknown(j,
                 {"image_size", "center_jitter", "blood_radius", "myo_thickness", "background_margin",
                  "background_control", "background_labeled", "myo_control", "control_cnr", "labeled_cnr",
                  "cnr_spread", "noise_sigma", "noise_scale", "true_mbf", "inversion_time", "t1_blood", "m0",
                  "partition_coefficient"},
                 "phantom");
  read(j, "image_size", c.image_size);
  read(j, "center_jitter", c.center_jitter);
  read(j, "blood_radius", c.blood_radius);
  read(j, "myo_thickness", c.myo_thickness);
  read(j, "background_margin", c.background_margin);
  read(j, "background_control", c.background_control);
  read(j, "background_labeled", c.background_labeled);
  read(j, "myo_control", c.myo_control);
  read(j, "control_cnr", c.control_cnr);
  read(j, "labeled_cnr", c.labeled_cnr);
  read(j, "cnr_spread", c.cnr_spread);
  read(j, "noise_sigma", c.noise_sigma);
  read(j, "noise_scale", c.noise_scale);
  read(j, "true_mbf", c.true_mbf);
  read(j, "inversion_time", c.constants.inversion_time);
  read(j, "t1_blood", c.constants.t1_blood);
  read(j, "m0", c.constants.m0);
  read(j, "partition_coefficient", c.constants.partition_coefficient);
  return c;
}

std::string to_string(ImageSubset s) {
  switch (s) {
    case ImageSubset::control: return "control";
    case ImageSubset::labeled: return "labeled";
    case ImageSubset::both: return "both";
  }
  return "?";
}

ImageSubset parse_image_subset(const std::string& s) {
  if (s == "control") return ImageSubset::control;
  if (s == "labeled") return ImageSubset::labeled;
  if (s == "both") return ImageSubset::both;
  throw ConfigError("unknown image subset '" + s + "' (expected control, labeled or both)");
}

void ExperimentConfig::validate() const {
  unet.validate();
  try {
    loss.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  phantom.validate();
  if (epochs < 0) throw ConfigError("config: epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("config: batch_size must be positive");
  if (learning_rate < 0.0) throw ConfigError("config: learning_rate must be nonnegative");
  if (trial_batch < 1 || timing_trials < 1) throw ConfigError("config: MC trial counts must be positive");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("config: every beta must lie in (0, 1)");
  for (auto b : timing_batch_sizes)
    if (b < 1) throw ConfigError("config: timing batch sizes must be positive");
  if (sweep_seeds.empty()) throw ConfigError("config: sweep_seeds must not be empty");
}

AdamConfig ExperimentConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  return a;
}

json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"out_dir", c.out_dir},
          {"dataset_dir", c.dataset_dir},
          {"checkpoint", c.checkpoint},
          {"init_from", c.init_from},
          {"phantom", to_json(c.phantom)},
          {"train_series", c.train_series},
          {"val_series", c.val_series},
          {"test_series", c.test_series},
          {"unet", to_json(c.unet)},
          {"loss", to_json(c.loss)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"subset", to_string(c.subset)},
          {"max_train_images", c.max_train_images},
          {"n_mc_trials", c.n_mc_trials},
          {"trial_batch", c.trial_batch},
          {"eval_subset", to_string(c.eval_subset)},
          {"max_eval_images", c.max_eval_images},
          {"timing_batch_sizes", c.timing_batch_sizes},
          {"timing_trials", c.timing_trials},
          {"betas", c.betas},
          {"sweep_seeds", c.sweep_seeds}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig c) {
  reject_unknown(j,
                 {"seed", "out_dir", "dataset_dir", "checkpoint", "init_from", "phantom", "train_series",
                  "val_series", "test_series", "unet", "loss", "epochs", "batch_size", "learning_rate", "subset",
                  "max_train_images", "n_mc_trials", "trial_batch", "eval_subset", "max_eval_images",
                  "timing_batch_sizes", "timing_trials", "betas", "sweep_seeds"},
                 "experiment config");
  read(j, "seed", c.seed);
  read(j, "out_dir", c.out_dir);
  read(j, "dataset_dir", c.dataset_dir);
  read(j, "checkpoint", c.checkpoint);
  read(j, "init_from", c.init_from);
  if (j.contains("phantom")) c.phantom = phantom_config_from_json(j.at("phantom"), c.phantom);
  read(j, "train_series", c.train_series);
  read(j, "val_series", c.val_series);
  read(j, "test_series", c.test_series);
  if (j.contains("unet")) c.unet = unet_config_from_json(j.at("unet"), c.unet);
  if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"), c.loss);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "learning_rate", c.learning_rate);
  if (j.contains("subset")) c.subset = parse_image_subset(j.at("subset").get<std::string>());
  read(j, "max_train_images", c.max_train_images);
  read(j, "n_mc_trials", c.n_mc_trials);
  read(j, "trial_batch", c.trial_batch);
  if (j.contains("eval_subset")) c.eval_subset = parse_image_subset(j.at("eval_subset").get<std::string>());
  read(j, "max_eval_images", c.max_eval_images);
  read(j, "timing_batch_sizes", c.timing_batch_sizes);
  read(j, "timing_trials", c.timing_trials);
  read(j, "betas", c.betas);
  read(j, "sweep_seeds", c.sweep_seeds);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace mcdseg
