#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcdseg/config.hpp"
#include "mcdseg/dataset.hpp"
#include "mcdseg/metrics.hpp"
#include "mcdseg/training.hpp"
#include "mcdseg/uncertainty.hpp"

namespace mcdseg {

/// git blob hash: SHA-1 of "blob <size>\0" followed by the bytes, lowercase hex.
std::string git_blob_hash(std::span<const std::byte> bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_double(double v);

/// Provenance record written next to a command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, const ExperimentConfig& config);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path, nlohmann::json columns = nlohmann::json::object());
  void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }
  void add_timing(const std::string& key, double seconds) { doc_["timings_seconds"][key] = seconds; }
  const nlohmann::json& document() const { return doc_; }
  /// Writes <dir>/manifest_<command>.json and returns its path.
  std::filesystem::path save(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  nlohmann::json doc_;
};

/// Seed of the MC run for image `index` of an evaluation.
std::uint64_t image_seed(std::uint64_t seed, std::uint64_t index);

/// MC mean-prediction masks (n_trials >= 1) or deterministic masks (n_trials == 0).
std::vector<BinaryMask> predicted_masks(UNetModel<float>& model, const std::vector<Sample>& samples,
                                        std::size_t n_trials, std::size_t trial_batch, std::uint64_t seed);

std::vector<Sample> limit_samples(std::vector<Sample> samples, std::size_t max_count);

struct GenerateResult {
  std::filesystem::path dir;
  std::size_t train_images = 0, val_images = 0, test_images = 0;
};
GenerateResult cmd_generate(const ExperimentConfig& config);

struct TrainCommandResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;  // empty without validation data
  TrainResult training;
  double final_train_loss = 0.0;
  double val_dice = 0.0;   // deterministic-mode Dice on the validation split
  double test_dice = 0.0;  // same on the test split when present, else NaN
};
TrainCommandResult cmd_train(const ExperimentConfig& config);

struct UncertaintyRow {
  UncertaintyReport report;
  double cnr = 0.0;
  double pn = 0.0;
};
struct UncertaintyCommandResult {
  std::vector<UncertaintyRow> rows;
  std::size_t empty_predictions = 0;
  std::optional<RegressionResult> mcd_vs_dice;  // empty when degenerate
  std::optional<RegressionResult> mcd_vs_pn;
};
UncertaintyCommandResult cmd_uncertainty(const ExperimentConfig& config);

struct BetaSweepRow {
  std::string loss_kind;  // bce, dice, tversky, thin_mask, thick_mask
  std::optional<double> beta;
  FpFnRates rates;
  double mean_dice = 0.0;
};
struct BetaSweepResult {
  std::vector<BetaSweepRow> rows;                  // averaged over seeds
  std::vector<std::vector<BetaSweepRow>> per_seed;  // one list per sweep seed
  double spearman_fp = 0.0;  // mean over seeds of Spearman(fp_rate, beta)
  double spearman_fn = 0.0;
};
BetaSweepResult cmd_beta_sweep(const ExperimentConfig& config);

struct MbfRow {
  std::size_t series_id = 0;
  std::string mask_kind;  // reference, predicted, thin, thick
  std::optional<double> mbf;  // empty when the mask is empty
  double true_mbf = 0.0;
};
struct MbfCommandResult {
  std::vector<MbfRow> rows;
  std::size_t empty_predictions = 0;
  std::optional<RegressionResult> predicted_vs_reference;
  double thin_bias = 0.0, thin_bias_se = 0.0;  // mbf - true_mbf
  double thick_bias = 0.0, thick_bias_se = 0.0;
};
MbfCommandResult cmd_mbf_eval(const ExperimentConfig& config);

struct TimingRow {
  std::size_t batch_size = 0;
  double seconds = 0.0;
  double dice_uncertainty = 0.0;
  std::string mean_prediction_hash;
};
struct TimingCommandResult {
  std::vector<TimingRow> rows;
  bool identical = false;  // mean prediction and Dice Uncertainty equal across batch sizes
};
TimingCommandResult cmd_timing(const ExperimentConfig& config);

}  // namespace mcdseg
