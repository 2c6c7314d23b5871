#include <exception>
#include <iostream>

#include "CLI11.hpp"

#include "evidence3/commands.hpp"
#include "evidence3/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "evidence3: photometric-perturbation synthesis, statistical detection, "
      "and cue-conditioned toy training"};
  app.require_subcommand(1);

  ev3::GenOptions gen_opt;
  CLI::App* gen = app.add_subcommand(
      "gen", "Generate a clean synthetic corpus with a JSONL manifest");
  gen->add_option("--out", gen_opt.out_manifest, "Output manifest path")
      ->required();
  gen->add_option("--count", gen_opt.count, "Number of records")->capture_default_str();
  gen->add_option("--seed", gen_opt.seed, "Global seed")->capture_default_str();
  gen->add_option("--split", gen_opt.split, "Split label: train or eval")->capture_default_str();
  gen->add_flag("--quiet", gen_opt.quiet, "Suppress progress output");
  gen->callback([&gen_opt]() { ev3::cmd_gen(gen_opt); });

  ev3::CalibrateOptions cal_opt;
  CLI::App* cal = app.add_subcommand(
      "calibrate", "Calibrate detection statistics on clean records");
  cal->add_option("--manifest", cal_opt.manifest, "Input manifest (JSONL)")
      ->required();
  cal->add_option("--out", cal_opt.out_stats, "Output stats file (JSON)")
      ->required();
  cal->add_option("--config", cal_opt.config_path, "JSON config file");
  cal->add_option("--quantile", cal_opt.quantile,
                  "Threshold quantile in (0,1]");
  cal->add_option("--epsilon", cal_opt.epsilon,
                  "Covariance diagonal regularizer");
  cal->add_option("--cutoff", cal_opt.cutoff_frac,
                  "Radial frequency cutoff fraction");
  cal->add_option("--win", cal_opt.win, "Entropy window side");
  cal->add_option("--bins", cal_opt.bins, "Entropy histogram bins");
  cal->add_flag("--quiet", cal_opt.quiet, "Suppress progress output");
  cal->callback([&cal_opt]() { ev3::cmd_calibrate(cal_opt); });

  ev3::PerturbOptions pert_opt;
  CLI::App* pert = app.add_subcommand(
      "perturb", "Write a clean copy plus one perturbed variant per record");
  pert->add_option("--in", pert_opt.manifest_in, "Input manifest (JSONL)")
      ->required();
  pert->add_option("--out", pert_opt.manifest_out, "Output manifest (JSONL)")
      ->required();
  pert->add_option("--seed", pert_opt.seed, "Global seed")->capture_default_str();
  pert->add_option("--config", pert_opt.config_path,
                   "JSON config file (sampler ranges)");
  pert->add_flag("--quiet", pert_opt.quiet, "Suppress progress output");
  pert->callback([&pert_opt]() { ev3::cmd_perturb(pert_opt); });

  ev3::DetectOptions det_opt;
  CLI::App* det = app.add_subcommand(
      "detect", "Run the detector over a manifest and write a JSONL report");
  det->add_option("--manifest", det_opt.manifest, "Input manifest (JSONL)")
      ->required();
  det->add_option("--stats", det_opt.stats, "Calibration stats file")
      ->required();
  det->add_option("--out", det_opt.report_out, "Output report path (JSONL)")
      ->required();
  det->add_flag("--quiet", det_opt.quiet, "Suppress the summary line");
  det->callback([&det_opt]() { ev3::cmd_detect(det_opt); });

  ev3::ExperimentOptions exp_opt;
  CLI::App* exp = app.add_subcommand(
      "experiment", "Run the default/augmented/proposed comparison");
  exp->add_option("--out", exp_opt.out_report, "Output report path (JSON)")
      ->required();
  exp->add_option("--seeds", exp_opt.seeds,
                  "Comma-separated experiment seeds (default 1,2,3)")
      ->delimiter(',');
  exp->add_option("--seed", exp_opt.base_seed,
                  "Base seed; runs seeds {s, s+1, s+2} unless --seeds is set");
  exp->add_option("--config", exp_opt.config_path, "JSON config file");
  exp->add_option("--train-size", exp_opt.n_train, "Training corpus size");
  exp->add_option("--eval-size", exp_opt.n_eval, "Evaluation corpus size");
  exp->add_option("--epochs", exp_opt.epochs, "Training epochs");
  exp->add_option("--batch", exp_opt.batch, "Mini-batch size");
  exp->add_option("--hidden", exp_opt.hidden, "Hidden layer width");
  exp->add_option("--lr", exp_opt.lr, "Learning rate");
  exp->add_option("--lambda", exp_opt.lambda_xai,
                  "Weight of the explanation loss");
  exp->add_flag("--quiet", exp_opt.quiet, "Suppress the summary table");
  exp->callback([&exp_opt]() { ev3::cmd_experiment(exp_opt); });

  ev3::ExplainOptions expl_opt;
  CLI::App* expl = app.add_subcommand(
      "explain", "Detect on one image and print the explanation as JSON");
  expl->add_option("--image", expl_opt.image, "Image path (PNG or PPM)")
      ->required();
  expl->add_option("--stats", expl_opt.stats, "Calibration stats file")
      ->required();
  expl->callback([&expl_opt]() { ev3::cmd_explain(expl_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ev3::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ev3::CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ev3::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ev3::TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
