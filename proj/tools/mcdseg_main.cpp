// mcdseg: phantom generation, training and MC-dropout evaluation.
//
//   mcdseg generate    --out data/
//   mcdseg train       --dataset data/ --out run/ [--init-from ckpt --subset labeled]
//   mcdseg uncertainty --dataset data/ --checkpoint run/model.tensors --out eval/
//   mcdseg beta-sweep  --dataset data/ --out sweep/
//   mcdseg mbf-eval    --dataset data/ --checkpoint run/model.tensors --out eval/
//   mcdseg timing      --dataset data/ --checkpoint run/model.tensors --out eval/
//
// Exit codes: 0 success, 2 bad command line, otherwise the library's error
// code (10 dimension ... 24 config mismatch), 1 for anything unexpected.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "mcdseg/commands.hpp"

namespace {

using mcdseg::ExperimentConfig;
using nlohmann::json;

struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, dataset, checkpoint, init_from, subset, eval_subset, loss;
  std::optional<double> beta, lr;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size, trials, trial_batch, series_train, series_val, series_test, max_train,
      max_eval;

  ExperimentConfig resolve() const {
    ExperimentConfig c = config_file.empty() ? ExperimentConfig{} : mcdseg::load_experiment_config(config_file);
    if (seed) c.seed = *seed;
    if (out) c.out_dir = *out;
    if (dataset) c.dataset_dir = *dataset;
    if (checkpoint) c.checkpoint = *checkpoint;
    if (init_from) c.init_from = *init_from;
    if (subset) c.subset = mcdseg::parse_image_subset(*subset);
    if (eval_subset) c.eval_subset = mcdseg::parse_image_subset(*eval_subset);
    if (loss) {
      try {
        c.loss.kind = mcdseg::parse_loss_kind(*loss);
      } catch (const mcdseg::ParameterError& e) {
        throw mcdseg::ConfigError(e.what());
      }
    }
    if (beta) c.loss.beta = *beta;
    if (lr) c.learning_rate = *lr;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (trials) c.n_mc_trials = *trials;
    if (trial_batch) c.trial_batch = *trial_batch;
    if (series_train) c.train_series = *series_train;
    if (series_val) c.val_series = *series_val;
    if (series_test) c.test_series = *series_test;
    if (max_train) c.max_train_images = *max_train;
    if (max_eval) c.max_eval_images = *max_eval;
    return c;
  }
};

json regression(const std::optional<mcdseg::RegressionResult>& r) {
  if (!r) return nullptr;
  return {{"slope", r->slope}, {"intercept", r->intercept}, {"r_squared", r->r_squared}, {"ccc", r->ccc}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MC-dropout U-Net segmentation with uncertainty on synthetic ASL phantoms"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_file, "JSON experiment config; flags override its values")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto data = [&](CLI::App* sub) { sub->add_option("--dataset", o.dataset, "Directory written by generate"); };
  auto model = [&](CLI::App* sub) { sub->add_option("--checkpoint", o.checkpoint, "Trained model file"); };
  auto train_opts = [&](CLI::App* sub) {
    sub->add_option("--epochs", o.epochs);
    sub->add_option("--batch-size", o.batch_size);
    sub->add_option("--lr", o.lr, "Adam learning rate");
    sub->add_option("--subset", o.subset, "control, labeled or both");
    sub->add_option("--max-train-images", o.max_train);
  };
  auto mc_opts = [&](CLI::App* sub) {
    sub->add_option("--trials", o.trials, "MC trials per image (0 = deterministic where allowed)");
    sub->add_option("--trial-batch", o.trial_batch, "Trials per forward pass");
    sub->add_option("--eval-subset", o.eval_subset, "control, labeled or both");
    sub->add_option("--max-eval-images", o.max_eval);
  };

  auto* gen = app.add_subcommand("generate", "Write train/val/test phantom splits");
  common(gen);
  gen->add_option("--train-series", o.series_train);
  gen->add_option("--val-series", o.series_val);
  gen->add_option("--test-series", o.series_test);

  auto* train = app.add_subcommand("train", "Train a U-Net and save model/best checkpoints and the loss log");
  common(train);
  data(train);
  train_opts(train);
  train->add_option("--loss", o.loss, "bce, dice or tversky");
  train->add_option("--beta", o.beta, "Tversky beta");
  train->add_option("--init-from", o.init_from, "Checkpoint to fine-tune");

  auto* unc = app.add_subcommand("uncertainty", "MC-dropout uncertainty report per test image");
  common(unc);
  data(unc);
  model(unc);
  mc_opts(unc);

  auto* sweep = app.add_subcommand("beta-sweep", "Train one model per Tversky beta plus BCE and Dice baselines");
  common(sweep);
  data(sweep);
  train_opts(sweep);
  mc_opts(sweep);

  auto* mbf = app.add_subcommand("mbf-eval", "MBF from reference, predicted, thin and thick masks");
  common(mbf);
  data(mbf);
  model(mbf);
  mc_opts(mbf);

  auto* timing = app.add_subcommand("timing", "MC inference wall clock against trial batch size");
  common(timing);
  data(timing);
  model(timing);
  mc_opts(timing);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig c = o.resolve();
    json summary;
    if (gen->parsed()) {
      const auto r = mcdseg::cmd_generate(c);
      summary = {{"dir", r.dir.string()}, {"train_images", r.train_images}, {"val_images", r.val_images},
                 {"test_images", r.test_images}};
    } else if (train->parsed()) {
      const auto r = mcdseg::cmd_train(c);
      summary = {{"checkpoint", r.final_checkpoint.string()}, {"best_checkpoint", r.best_checkpoint.string()},
                 {"final_train_loss", r.final_train_loss}, {"val_dice", r.val_dice}, {"test_dice", r.test_dice}};
    } else if (unc->parsed()) {
      const auto r = mcdseg::cmd_uncertainty(c);
      summary = {{"images", r.rows.size()}, {"empty_predictions", r.empty_predictions},
                 {"mcd_vs_dice_uncertainty", regression(r.mcd_vs_dice)}, {"mcd_vs_pn", regression(r.mcd_vs_pn)}};
    } else if (sweep->parsed()) {
      const auto r = mcdseg::cmd_beta_sweep(c);
      summary = {{"spearman_fp_vs_beta", r.spearman_fp}, {"spearman_fn_vs_beta", r.spearman_fn}};
    } else if (mbf->parsed()) {
      const auto r = mcdseg::cmd_mbf_eval(c);
      summary = {{"predicted_vs_reference", regression(r.predicted_vs_reference)},
                 {"thin_bias", r.thin_bias}, {"thick_bias", r.thick_bias},
                 {"empty_predictions", r.empty_predictions}};
    } else if (timing->parsed()) {
      const auto r = mcdseg::cmd_timing(c);
      json rows = json::array();
      for (const auto& row : r.rows) rows.push_back({{"batch_size", row.batch_size}, {"seconds", row.seconds}});
      summary = {{"identical_across_batch_sizes", r.identical}, {"rows", rows}};
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const mcdseg::Error& e) {
    std::cerr << "mcdseg: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "mcdseg: unexpected error: " << e.what() << "\n";
    return 1;
  }
}
