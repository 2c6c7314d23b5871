#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evidence3/evidence.hpp"
#include "evidence3/perturb.hpp"
#include "evidence3/vlatoy.hpp"

namespace ev3 {

// Shared option-file schema (all keys optional): sampler ranges, metric
// parameters, calibration quantile/epsilon, training hyperparameters, and
// experiment sizes. Commands start from these values and apply explicit
// command-line overrides on top.
struct FileConfig {
  SamplerConfig sampler{};
  MetricParams metric_params{};
  double quantile = 0.99;
  double epsilon = 1e-6;
  double lambda_xai = 0.5;
  double lr = 0.01;
  int epochs = 4000;
  int batch = 32;
  int hidden = 64;
  int n_train = 2000;
  int n_eval = 500;
};

// Parses the JSON config file; missing keys keep their defaults. Throws
// IoError when unreadable, ValidationError when malformed.
FileConfig load_file_config(const std::string& path);
FileConfig config_from_json(const nlohmann::json& j);

// Commands throw on failure (IoError / CalibrationError / ValidationError /
// TrainingError); the CLI layer maps exceptions to exit codes 2 / 3 / 3 / 4.

struct GenOptions {
  std::string out_manifest;
  int count = 100;
  std::uint64_t seed = 1;
  std::string split = "train";
  bool quiet = false;
};
// Writes `count` clean synthetic records (PNG images beside the manifest).
void cmd_gen(const GenOptions& opt);

struct CalibrateOptions {
  std::string manifest;
  std::string out_stats;
  std::string config_path;  // empty => defaults
  std::optional<double> quantile;
  std::optional<double> epsilon;
  std::optional<double> cutoff_frac;
  std::optional<int> win;
  std::optional<int> bins;
  bool quiet = false;
};
// Calibrates the detector on the manifest's clean records and writes the
// stats file.
void cmd_calibrate(const CalibrateOptions& opt);

struct PerturbOptions {
  std::string manifest_in;
  std::string manifest_out;
  std::uint64_t seed = 1;
  std::string config_path;  // sampler ranges
  bool quiet = false;
};
// For every input record writes a byte-identical clean copy plus one
// perturbed variant (always nonempty spec; per-record seed derived from the
// global seed). Partially written outputs are removed on failure.
void cmd_perturb(const PerturbOptions& opt);

struct DetectOptions {
  std::string manifest;
  std::string stats;
  std::string report_out;
  bool quiet = false;
};
// Writes one report line per record plus a trailing summary line with
// per-flag TPR/FPR where the corresponding denominator is nonempty.
void cmd_detect(const DetectOptions& opt);

struct ExperimentOptions {
  std::string out_report;
  std::vector<std::uint64_t> seeds;       // empty => derived from base_seed
  std::optional<std::uint64_t> base_seed; // default seeds 1,2,3
  std::string config_path;
  std::optional<int> n_train;
  std::optional<int> n_eval;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<int> hidden;
  std::optional<double> lr;
  std::optional<double> lambda_xai;
  bool quiet = false;
};
// Runs the three-mode comparison once per seed, writes the merged JSON
// report, and prints the cross-seed summary table.
void cmd_experiment(const ExperimentOptions& opt);

struct ExplainOptions {
  std::string image;
  std::string stats;
};
// Prints the detection report, cue string, and rendered explanation for a
// single image as JSON on standard output.
void cmd_explain(const ExplainOptions& opt);

}  // namespace ev3
