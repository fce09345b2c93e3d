#include "mcdseg/commands.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

namespace mcdseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_hash(std::span<const std::byte> bytes) {
  const std::string prefix = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw IoError("SHA-1 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string git_blob_hash_file(const fs::path& path) { return git_blob_hash(read_file_bytes(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

RunManifest::RunManifest(std::string command, const ExperimentConfig& config) : command_(std::move(command)) {
  doc_["command"] = command_;
  doc_["config"] = to_json(config);
  doc_["seed"] = config.seed;
  doc_["rng_algorithm"] = RngStream::kAlgorithm;
  doc_["inputs"] = json::object();
  doc_["outputs"] = json::object();
  doc_["timings_seconds"] = json::object();
}

void RunManifest::add_input(const fs::path& path) {
  doc_["inputs"][path.filename().string()] = {{"path", path.string()}, {"git_blob_sha1", git_blob_hash_file(path)}};
}

void RunManifest::add_output(const fs::path& path, json columns) {
  doc_["outputs"][path.filename().string()] = {{"path", path.string()}, {"columns", std::move(columns)}};
}

fs::path RunManifest::save(const fs::path& dir) const {
  const fs::path p = dir / ("manifest_" + command_ + ".json");
  std::ofstream out(p);
  if (!out) throw IoError("cannot write manifest '" + p.string() + "'");
  out << doc_.dump(2) << "\n";
  return p;
}

std::uint64_t image_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

namespace {

fs::path ensure_out_dir(const ExperimentConfig& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

fs::path require_dataset(const ExperimentConfig& c, const std::string& split) {
  if (c.dataset_dir.empty()) throw UsageError("a dataset directory is required (dataset_dir / --dataset)");
  const fs::path p = split_path(c.dataset_dir, split);
  if (!fs::exists(p)) throw IoError("missing dataset split '" + p.string() + "'");
  return p;
}

fs::path require_checkpoint(const ExperimentConfig& c) {
  if (c.checkpoint.empty()) throw UsageError("a checkpoint is required (checkpoint / --checkpoint)");
  if (!fs::exists(c.checkpoint)) throw IoError("missing checkpoint '" + c.checkpoint + "'");
  return c.checkpoint;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string image_id(const Sample& s) {
  return "s" + std::to_string(s.series) + "_p" + std::to_string(s.pair) + (s.labeled ? "_labeled" : "_control");
}

std::optional<RegressionResult> try_regression(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return linear_regression(x, y);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

json regression_json(const std::optional<RegressionResult>& r) {
  if (!r) return {{"degenerate", true}};
  return {{"degenerate", false}, {"slope", r->slope},     {"intercept", r->intercept},
          {"r_squared", r->r_squared}, {"ccc", r->ccc}, {"pearson", r->pearson}, {"n", r->n}};
}

struct TrainedModel {
  std::unique_ptr<UNetModel<float>> model;
  TrainingState state;
  TrainResult result;
};

// Model init, fine-tuning start point and training, without touching disk
// beyond reading init_from.
TrainedModel train_from_config(const ExperimentConfig& c, const std::vector<Sample>& train,
                               const std::vector<Sample>& val) {
  TrainedModel t;
  RngStream init_rng(c.seed, split_stream_id("init"));
  t.model = std::make_unique<UNetModel<float>>(c.unet, init_rng);
  if (!c.init_from.empty()) {
    if (!fs::exists(c.init_from)) throw IoError("missing checkpoint '" + c.init_from + "'");
    load_checkpoint(c.init_from, *t.model);
    // Fine-tuning restarts the optimizer.
    for (auto& [name, p] : t.model->parameters()) {
      p->adam_m.fill(0.0f);
      p->adam_v.fill(0.0f);
      p->step_count = 0;
    }
  }
  t.state.rng = RngStream(c.seed, split_stream_id("train"));
  t.state.adam = c.adam();
  t.state.extra = {{"loss", to_json(c.loss)}, {"subset", to_string(c.subset)}};
  TrainOptions opt;
  opt.epochs = c.epochs;
  opt.batch_size = c.batch_size;
  opt.loss = c.loss;
  opt.keep_best = !val.empty();
  t.result = train_model(*t.model, train, val, t.state, opt);
  return t;
}

double mean_dice(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& ref) {
  if (pred.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += dice_coefficient(pred[i], ref[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace

std::vector<BinaryMask> predicted_masks(UNetModel<float>& model, const std::vector<Sample>& samples,
                                        std::size_t n_trials, std::size_t trial_batch, std::uint64_t seed) {
  if (n_trials == 0) return predict_masks(model, samples);
  std::vector<BinaryMask> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto set = mc_predict(model, samples[i].image, n_trials, image_seed(seed, i), trial_batch);
    out.push_back(mean_prediction(set));
  }
  return out;
}

std::vector<Sample> limit_samples(std::vector<Sample> samples, std::size_t max_count) {
  if (max_count > 0 && samples.size() > max_count) samples.resize(max_count);
  return samples;
}

GenerateResult cmd_generate(const ExperimentConfig& c) {
  c.phantom.validate();
  GenerateResult r;
  r.dir = c.dataset_dir.empty() ? fs::path(c.out_dir) : fs::path(c.dataset_dir);
  std::error_code ec;
  fs::create_directories(r.dir, ec);
  if (ec || !fs::is_directory(r.dir)) throw IoError("cannot create output directory '" + r.dir.string() + "'");

  RunManifest manifest("generate", c);
  const auto t0 = std::chrono::steady_clock::now();
  json sizes = json::object();
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", c.train_series}, {"val", c.val_series}, {"test", c.test_series}};
  for (const auto& [name, n] : splits) {
    const SeriesSplit split = generate_split(name, n, c.phantom, c.seed);
    const fs::path p = split_path(r.dir, name);
    save_split(p, split, {{"seed", c.seed}, {"phantom", to_json(c.phantom)}});
    manifest.add_output(p);
    sizes[name] = {{"series", n}, {"images", split.image_count()}};
    if (std::string(name) == "train") r.train_images = split.image_count();
    if (std::string(name) == "val") r.val_images = split.image_count();
    if (std::string(name) == "test") r.test_images = split.image_count();
  }
  sizes["total_images"] = r.train_images + r.val_images + r.test_images;
  manifest.set("splits", sizes);
  manifest.add_timing("generate", seconds_since(t0));
  manifest.save(r.dir);
  return r;
}

TrainCommandResult cmd_train(const ExperimentConfig& c) {
  c.validate();
  const fs::path train_path = require_dataset(c, "train");
  const fs::path dir = ensure_out_dir(c);
  RunManifest manifest("train", c);
  manifest.add_input(train_path);

  const auto train = limit_samples(make_samples(load_split(train_path), c.subset), c.max_train_images);
  std::vector<Sample> val, test;
  const fs::path val_path = split_path(c.dataset_dir, "val");
  if (fs::exists(val_path)) {
    manifest.add_input(val_path);
    val = make_samples(load_split(val_path), c.subset);
  }
  const fs::path test_path = split_path(c.dataset_dir, "test");
  if (fs::exists(test_path)) {
    manifest.add_input(test_path);
    test = make_samples(load_split(test_path), c.subset);
  }
  if (!c.init_from.empty()) manifest.add_input(c.init_from);

  const auto t0 = std::chrono::steady_clock::now();
  TrainedModel t = train_from_config(c, train, val);
  manifest.add_timing("train", seconds_since(t0));

  TrainCommandResult r;
  r.training = t.result;
  r.final_checkpoint = dir / "model.tensors";
  save_checkpoint(r.final_checkpoint, *t.model, t.state);
  manifest.add_output(r.final_checkpoint);
  if (t.result.best) {
    r.best_checkpoint = dir / "best.tensors";
    t.result.best->save(r.best_checkpoint);
    manifest.add_output(r.best_checkpoint);
  }
  r.final_train_loss = t.result.log.empty() ? std::numeric_limits<double>::quiet_NaN() : t.result.log.back().train_loss;
  r.val_dice = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : mean_dice(predict_masks(*t.model, val), reference_masks(val));
  r.test_dice = test.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : mean_dice(predict_masks(*t.model, test), reference_masks(test));

  const fs::path log_path = dir / "loss_log.csv";
  {
    CsvWriter csv(log_path, {"epoch", "train_loss", "val_loss", "seconds"});
    json log = json::array();
    for (const auto& e : t.result.log) {
      csv.row({std::to_string(e.epoch), format_double(e.train_loss), format_double(e.val_loss),
               format_double(e.seconds)});
      log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                     {"val_loss", std::isnan(e.val_loss) ? json(nullptr) : json(e.val_loss)}});
    }
    manifest.set("loss_log", log);
  }
  manifest.add_output(log_path, {{"epoch", "1-based count"}, {"train_loss", "loss units"},
                                 {"val_loss", "loss units"}, {"seconds", "s (wall clock)"}});
  manifest.set("best_epoch", t.result.best_epoch);
  manifest.set("val_dice", std::isnan(r.val_dice) ? json(nullptr) : json(r.val_dice));
  manifest.set("test_dice", std::isnan(r.test_dice) ? json(nullptr) : json(r.test_dice));
  manifest.save(dir);
  return r;
}

UncertaintyCommandResult cmd_uncertainty(const ExperimentConfig& c) {
  c.validate();
  const fs::path ckpt = require_checkpoint(c);
  const fs::path test_path = require_dataset(c, "test");
  const fs::path dir = ensure_out_dir(c);
  RunManifest manifest("uncertainty", c);
  manifest.add_input(ckpt);
  manifest.add_input(test_path);

  UNetModel<float> model = load_model<float>(ckpt);
  const SeriesSplit split = load_split(test_path);
  const auto samples = limit_samples(make_samples(split, c.eval_subset), c.max_eval_images);

  UncertaintyCommandResult r;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> dice_u, mcd_u, pn_x;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const ASLSeries& series = split.series[s.series];
    const auto set = mc_predict(model, s.image, c.n_mc_trials, image_seed(c.seed, i), c.trial_batch, image_id(s));
    UncertaintyRow row;
    row.report = uncertainty_report(set, series.reference_mask);
    const Tensor<double>& raw = s.labeled ? series.labeled[s.pair] : series.control[s.pair];
    row.cnr = compute_cnr(raw, series.reference_mask, series.blood_mask, series.background_mask);
    row.pn = quantify_mbf(series, series.reference_mask, c.phantom.constants).physiological_noise;
    if (row.report.mcd_uncertainty) {
      dice_u.push_back(row.report.dice_uncertainty);
      mcd_u.push_back(*row.report.mcd_uncertainty);
      pn_x.push_back(row.pn);
    } else {
      ++r.empty_predictions;
    }
    r.rows.push_back(row);
  }
  manifest.add_timing("mc_inference", seconds_since(t0));
  if (dice_u.size() >= 3) {
    r.mcd_vs_dice = try_regression(dice_u, mcd_u);
    r.mcd_vs_pn = try_regression(pn_x, mcd_u);
  }

  const fs::path csv_path = dir / "uncertainty.csv";
  {
    CsvWriter csv(csv_path, {"image_id", "mean_dice", "dice_uncertainty", "mcd_uncertainty", "predicted_volume",
                             "cnr", "pn"});
    for (const auto& row : r.rows) {
      const auto& rep = row.report;
      csv.row({rep.image_id, format_double(rep.mean_dice), format_double(rep.dice_uncertainty),
               rep.mcd_uncertainty ? format_double(*rep.mcd_uncertainty) : "nan",
               std::to_string(rep.predicted_volume), format_double(row.cnr), format_double(row.pn)});
    }
  }
  manifest.add_output(csv_path, {{"image_id", "identifier"},
                                 {"mean_dice", "dimensionless, mean over trials"},
                                 {"dice_uncertainty", "dimensionless, population std over trials"},
                                 {"mcd_uncertainty", "dimensionless; nan = empty mean prediction"},
                                 {"predicted_volume", "pixels"},
                                 {"cnr", "dimensionless"},
                                 {"pn", "ml/g/min"}});
  manifest.set("empty_predictions", r.empty_predictions);
  manifest.set("regression_mcd_vs_dice_uncertainty", regression_json(r.mcd_vs_dice));
  manifest.set("regression_mcd_vs_pn", regression_json(r.mcd_vs_pn));
  manifest.save(dir);
  return r;
}

BetaSweepResult cmd_beta_sweep(const ExperimentConfig& c) {
  c.validate();
  const fs::path train_path = require_dataset(c, "train");
  const fs::path test_path = require_dataset(c, "test");
  const fs::path dir = ensure_out_dir(c);
  RunManifest manifest("beta-sweep", c);
  manifest.add_input(train_path);
  manifest.add_input(test_path);

  const auto train = limit_samples(make_samples(load_split(train_path), c.subset), c.max_train_images);
  std::vector<Sample> val;
  const fs::path val_path = split_path(c.dataset_dir, "val");
  if (fs::exists(val_path)) {
    manifest.add_input(val_path);
    val = make_samples(load_split(val_path), c.subset);
  }
  const auto test = limit_samples(make_samples(load_split(test_path), c.eval_subset), c.max_eval_images);
  const auto refs = reference_masks(test);

  std::vector<LossConfig> losses{LossConfig::bce(), LossConfig::dice()};
  for (double b : c.betas) losses.push_back(LossConfig::tversky(b));
  for (auto& l : losses) {
    l.smooth_epsilon = c.loss.smooth_epsilon;
    l.clamp_epsilon = c.loss.clamp_epsilon;
  }

  BetaSweepResult r;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed : c.sweep_seeds) {
    std::vector<BetaSweepRow> rows;
    for (const auto& loss : losses) {
      ExperimentConfig run = c;
      run.seed = seed;
      run.loss = loss;
      run.init_from.clear();
      TrainedModel t = train_from_config(run, train, val);
      const auto pred = predicted_masks(*t.model, test, c.n_mc_trials, c.trial_batch, seed);
      BetaSweepRow row;
      row.loss_kind = to_string(loss.kind);
      row.beta = loss.beta;
      row.rates = fp_fn_rates(pred, refs);
      row.mean_dice = mean_dice(pred, refs);
      rows.push_back(row);
    }
    std::vector<double> betas, fp, fn;
    for (const auto& row : rows) {
      if (row.loss_kind != "tversky") continue;
      betas.push_back(*row.beta);
      fp.push_back(row.rates.fp_rate);
      fn.push_back(row.rates.fn_rate);
    }
    double s_fp = std::numeric_limits<double>::quiet_NaN(), s_fn = s_fp;
    if (betas.size() >= 2) {
      try { s_fp = spearman_correlation(fp, betas); } catch (const DegenerateError&) {}
      try { s_fn = spearman_correlation(fn, betas); } catch (const DegenerateError&) {}
    }
    r.spearman_fp += s_fp / static_cast<double>(c.sweep_seeds.size());
    r.spearman_fn += s_fn / static_cast<double>(c.sweep_seeds.size());
    r.per_seed.push_back(std::move(rows));
  }
  manifest.add_timing("sweep", seconds_since(t0));

  // Seed-averaged rows, then the morphology endpoints on the same references.
  for (std::size_t k = 0; k < losses.size(); ++k) {
    BetaSweepRow avg = r.per_seed[0][k];
    avg.rates = {};
    avg.mean_dice = 0.0;
    const double n = static_cast<double>(r.per_seed.size());
    for (const auto& rows : r.per_seed) {
      avg.rates.fp_rate += rows[k].rates.fp_rate / n;
      avg.rates.fn_rate += rows[k].rates.fn_rate / n;
      avg.mean_dice += rows[k].mean_dice / n;
    }
    r.rows.push_back(avg);
  }
  for (const char* kind : {"thin_mask", "thick_mask"}) {
    std::vector<BinaryMask> m;
    for (const auto& ref : refs) m.push_back(std::string(kind) == "thin_mask" ? erode1(ref) : dilate1(ref));
    r.rows.push_back({kind, std::nullopt, fp_fn_rates(m, refs), mean_dice(m, refs)});
  }

  const fs::path csv_path = dir / "beta_sweep.csv";
  {
    CsvWriter csv(csv_path, {"loss_kind", "beta", "fp_rate", "fn_rate", "mean_dice"});
    for (const auto& row : r.rows) {
      csv.row({row.loss_kind, row.beta ? format_double(*row.beta) : "", format_double(row.rates.fp_rate),
               format_double(row.rates.fn_rate), format_double(row.mean_dice)});
    }
  }
  const json columns = {{"loss_kind", "bce, dice, tversky, thin_mask or thick_mask"},
                        {"beta", "dimensionless; empty when not applicable"},
                        {"fp_rate", "pixels per image"},
                        {"fn_rate", "pixels per image"},
                        {"mean_dice", "dimensionless"}};
  manifest.add_output(csv_path, columns);
  const fs::path runs_path = dir / "beta_sweep_runs.csv";
  {
    CsvWriter csv(runs_path, {"seed", "loss_kind", "beta", "fp_rate", "fn_rate", "mean_dice"});
    for (std::size_t s = 0; s < r.per_seed.size(); ++s) {
      for (const auto& row : r.per_seed[s]) {
        csv.row({std::to_string(c.sweep_seeds[s]), row.loss_kind, row.beta ? format_double(*row.beta) : "",
                 format_double(row.rates.fp_rate), format_double(row.rates.fn_rate), format_double(row.mean_dice)});
      }
    }
  }
  json run_columns = columns;
  run_columns["seed"] = "training seed";
  manifest.add_output(runs_path, run_columns);
  manifest.set("spearman_fp_vs_beta", std::isnan(r.spearman_fp) ? json(nullptr) : json(r.spearman_fp));
  manifest.set("spearman_fn_vs_beta", std::isnan(r.spearman_fn) ? json(nullptr) : json(r.spearman_fn));
  manifest.save(dir);
  return r;
}

MbfCommandResult cmd_mbf_eval(const ExperimentConfig& c) {
  c.validate();
  const fs::path ckpt = require_checkpoint(c);
  const fs::path test_path = require_dataset(c, "test");
  const fs::path dir = ensure_out_dir(c);
  RunManifest manifest("mbf-eval", c);
  manifest.add_input(ckpt);
  manifest.add_input(test_path);

  UNetModel<float> model = load_model<float>(ckpt);
  const SeriesSplit split = load_split(test_path);
  const auto controls = make_samples(split, ImageSubset::control);
  const auto t0 = std::chrono::steady_clock::now();
  const auto pred = predicted_masks(model, controls, c.n_mc_trials, c.trial_batch, c.seed);
  manifest.add_timing("prediction", seconds_since(t0));

  MbfCommandResult r;
  std::vector<double> ref_x, pred_y, thin_bias, thick_bias;
  for (std::size_t k = 0; k < split.series.size(); ++k) {
    const ASLSeries& a = split.series[k];
    // Majority vote over the six control-image predictions, ties to foreground.
    BinaryMask vote(a.height, a.width);
    for (std::size_t i = 0; i < vote.size(); ++i) {
      std::size_t n = 0;
      for (std::size_t p = 0; p < kPairsPerSeries; ++p) n += pred[k * kPairsPerSeries + p][i];
      vote[i] = 2 * n >= kPairsPerSeries ? 1 : 0;
    }
    auto measure = [&](const BinaryMask& m) -> std::optional<double> {
      if (m.count() == 0) return std::nullopt;
      return quantify_mbf(a, m, c.phantom.constants).mean_mbf;
    };
    const auto ref = measure(a.reference_mask);
    const auto prd = measure(vote);
    const auto thin = measure(erode1(a.reference_mask));
    const auto thick = measure(dilate1(a.reference_mask));
    r.rows.push_back({k, "reference", ref, a.true_mbf});
    r.rows.push_back({k, "predicted", prd, a.true_mbf});
    r.rows.push_back({k, "thin", thin, a.true_mbf});
    r.rows.push_back({k, "thick", thick, a.true_mbf});
    if (!prd) ++r.empty_predictions;
    if (ref && prd) {
      ref_x.push_back(*ref);
      pred_y.push_back(*prd);
    }
    if (thin) thin_bias.push_back(*thin - a.true_mbf);
    if (thick) thick_bias.push_back(*thick - a.true_mbf);
  }
  if (ref_x.size() >= 3) r.predicted_vs_reference = try_regression(ref_x, pred_y);
  if (thin_bias.size() >= 2) {
    r.thin_bias = mean_of(thin_bias);
    r.thin_bias_se = standard_error(thin_bias);
  }
  if (thick_bias.size() >= 2) {
    r.thick_bias = mean_of(thick_bias);
    r.thick_bias_se = standard_error(thick_bias);
  }

  const fs::path csv_path = dir / "mbf.csv";
  {
    CsvWriter csv(csv_path, {"series_id", "mask_kind", "mbf", "true_mbf"});
    for (const auto& row : r.rows) {
      csv.row({std::to_string(row.series_id), row.mask_kind, row.mbf ? format_double(*row.mbf) : "nan",
               format_double(row.true_mbf)});
    }
  }
  manifest.add_output(csv_path, {{"series_id", "index in the test split"},
                                 {"mask_kind", "reference, predicted, thin or thick"},
                                 {"mbf", "ml/g/min; nan = empty mask"},
                                 {"true_mbf", "ml/g/min"}});
  manifest.set("empty_predictions", r.empty_predictions);
  manifest.set("regression_predicted_vs_reference", regression_json(r.predicted_vs_reference));
  manifest.set("thin_bias", {{"mean", r.thin_bias}, {"standard_error", r.thin_bias_se}});
  manifest.set("thick_bias", {{"mean", r.thick_bias}, {"standard_error", r.thick_bias_se}});
  manifest.save(dir);
  return r;
}

TimingCommandResult cmd_timing(const ExperimentConfig& c) {
  c.validate();
  const fs::path ckpt = require_checkpoint(c);
  const fs::path test_path = require_dataset(c, "test");
  const fs::path dir = ensure_out_dir(c);
  RunManifest manifest("timing", c);
  manifest.add_input(ckpt);
  manifest.add_input(test_path);

  UNetModel<float> model = load_model<float>(ckpt);
  const SeriesSplit split = load_split(test_path);
  const auto samples = limit_samples(make_samples(split, c.eval_subset), 1);
  if (samples.empty()) throw InputError("timing: the test split has no images");
  const BinaryMask& ref = split.series[samples[0].series].reference_mask;

  TimingCommandResult r;
  r.identical = true;
  for (std::size_t b : c.timing_batch_sizes) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto set = mc_predict(model, samples[0].image, c.timing_trials, image_seed(c.seed, 0), b);
    TimingRow row;
    row.seconds = seconds_since(t0);
    row.batch_size = b;
    row.dice_uncertainty = c.timing_trials >= 2 ? dice_uncertainty(set, ref) : 0.0;
    const BinaryMask mean = mean_prediction(set);
    row.mean_prediction_hash = git_blob_hash(std::as_bytes(mean.pixels()));
    if (!r.rows.empty()) {
      r.identical = r.identical && row.mean_prediction_hash == r.rows[0].mean_prediction_hash &&
                    row.dice_uncertainty == r.rows[0].dice_uncertainty;
    }
    r.rows.push_back(row);
  }

  const fs::path csv_path = dir / "timing.csv";
  {
    CsvWriter csv(csv_path, {"batch_size", "seconds", "dice_uncertainty"});
    for (const auto& row : r.rows) {
      csv.row({std::to_string(row.batch_size), format_double(row.seconds), format_double(row.dice_uncertainty)});
    }
  }
  manifest.add_output(csv_path, {{"batch_size", "trials per forward pass"},
                                 {"seconds", "s (wall clock; not reproducible)"},
                                 {"dice_uncertainty", "dimensionless"}});
  json hashes = json::array();
  for (const auto& row : r.rows) hashes.push_back({{"batch_size", row.batch_size}, {"mean_prediction_sha1", row.mean_prediction_hash}});
  manifest.set("mean_predictions", hashes);
  manifest.set("identical_across_batch_sizes", r.identical);
  manifest.save(dir);
  return r;
}

}  // namespace mcdseg
