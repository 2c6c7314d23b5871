#include "evidence3/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>

#include "evidence3/errors.hpp"
#include "evidence3/explain.hpp"
#include "evidence3/image_io.hpp"
#include "evidence3/io_util.hpp"
#include "evidence3/manifest.hpp"
#include "evidence3/parallel.hpp"
#include "evidence3/rng.hpp"

namespace fs = std::filesystem;

namespace ev3 {

namespace {

// Removes every file it was told about; used to honor the contract that a
// failed command leaves no partial outputs behind.
class OutputTracker {
 public:
  void add(const fs::path& p) {
    std::lock_guard<std::mutex> lock(mutex_);
    paths_.push_back(p);
  }
  void rollback() noexcept {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const fs::path& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    paths_.clear();
  }

 private:
  std::mutex mutex_;
  std::vector<fs::path> paths_;
};

std::pair<double, double> pair_from_json(const nlohmann::json& j,
                                         const char* name) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(std::string("config: ") + name +
                          " must be a [lo, hi] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

void check_range(const std::pair<double, double>& r, double lo_min,
                 double hi_max, const char* name) {
  if (!(r.first >= lo_min && r.first <= r.second && r.second <= hi_max))
    throw ValidationError(std::string("config: ") + name +
                          " must satisfy lo <= hi inside its legal bounds");
}

std::string indexed_name(const char* prefix, std::size_t i,
                         const std::string& suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, i);
  return std::string(buf) + suffix;
}

// Per-record detection line shared by cmd_detect and cmd_explain.
nlohmann::ordered_json detection_json(const std::string& image_path,
                                      const EvidenceReport& r,
                                      const PerturbationSpec* truth) {
  nlohmann::ordered_json j;
  j["image_path"] = image_path;
  j["mahal"] = r.d_mahal;
  j["hf"] = r.hf_ratio;
  j["entstd"] = r.ent_std;
  j["flags"] = {{"color", r.flag_color},
                {"noise", r.flag_noise},
                {"spatial", r.flag_spatial}};
  j["cue"] = render_cue(r);
  j["explanation"] = render_explanation(r).text;
  if (truth) j["truth_class"] = explanation_class(*truth);
  return j;
}

// Reference explanation for a known cause set: one sentence per active
// transform (illumination reports through the spatial-statistics slot),
// rendered with zero metric values since no calibration is in play.
std::string reference_explanation(const PerturbationSpec& spec) {
  EvidenceReport r;
  r.flag_color = spec.use_color;
  r.flag_noise = spec.use_noise;
  r.flag_spatial = spec.use_illum;
  return render_explanation(r).text;
}

struct ModeAccumulator {
  double current_l1 = 0.0;
  double next_l1 = 0.0;
  double xai_acc = 0.0;
  bool xai_reported = false;
};

nlohmann::ordered_json mode_metrics_json(double current_l1, double next_l1,
                                         bool xai_reported, double xai_acc) {
  nlohmann::ordered_json j;
  j["current_l1"] = current_l1;
  j["next_l1"] = next_l1;
  if (xai_reported)
    j["xai_acc"] = xai_acc;
  else
    j["xai_acc"] = nullptr;
  return j;
}

// Full-scale reference results echoed into every experiment report so the
// desk-scale numbers can be read side by side with them.
nlohmann::ordered_json reference_block() {
  nlohmann::ordered_json table;
  table["default"] = {{"current_l1", 0.0826},
                      {"next_l1", 0.0788},
                      {"xai_acc", nullptr}};
  table["augmented"] = {{"current_l1", 0.0695},
                        {"next_l1", 0.0697},
                        {"xai_acc", nullptr}};
  table["proposed"] = {{"current_l1", 0.0647},
                       {"next_l1", 0.0643},
                       {"xai_acc_percent", 99.77}};
  nlohmann::ordered_json j;
  j["table"] = std::move(table);
  return j;
}

}  // namespace

FileConfig config_from_json(const nlohmann::json& j) {
  FileConfig c;
  try {
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      if (s.contains("hue_range"))
        c.sampler.hue_range = pair_from_json(s.at("hue_range"), "hue_range");
      if (s.contains("gain_range"))
        c.sampler.gain_range =
            pair_from_json(s.at("gain_range"), "gain_range");
      if (s.contains("sigma_range"))
        c.sampler.sigma_range =
            pair_from_json(s.at("sigma_range"), "sigma_range");
      if (s.contains("p_clean")) c.sampler.p_clean = s.at("p_clean").get<double>();
    }
    if (j.contains("metric_params")) {
      const auto& m = j.at("metric_params");
      if (m.contains("cutoff_frac"))
        c.metric_params.cutoff_frac = m.at("cutoff_frac").get<double>();
      if (m.contains("win")) c.metric_params.win = m.at("win").get<int>();
      if (m.contains("bins")) c.metric_params.bins = m.at("bins").get<int>();
    }
    if (j.contains("quantile")) c.quantile = j.at("quantile").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.contains("lambda_xai")) c.lambda_xai = t.at("lambda_xai").get<double>();
      if (t.contains("lr")) c.lr = t.at("lr").get<double>();
      if (t.contains("epochs")) c.epochs = t.at("epochs").get<int>();
      if (t.contains("batch")) c.batch = t.at("batch").get<int>();
      if (t.contains("hidden")) c.hidden = t.at("hidden").get<int>();
    }
    if (j.contains("sizes")) {
      const auto& s = j.at("sizes");
      if (s.contains("n_train")) c.n_train = s.at("n_train").get<int>();
      if (s.contains("n_eval")) c.n_eval = s.at("n_eval").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }

  check_range(c.sampler.hue_range, 0.0, 180.0, "hue_range");
  check_range(c.sampler.sigma_range, 0.0, 1.0, "sigma_range");
  if (!(c.sampler.gain_range.first > 0.0 &&
        c.sampler.gain_range.first <= c.sampler.gain_range.second))
    throw ValidationError("config: gain_range must satisfy 0 < lo <= hi");
  if (!(c.sampler.p_clean >= 0.0 && c.sampler.p_clean <= 1.0))
    throw ValidationError("config: p_clean must be in [0,1]");
  if (!(c.quantile > 0.0 && c.quantile <= 1.0))
    throw ValidationError("config: quantile must be in (0,1]");
  if (!(c.epsilon > 0.0))
    throw ValidationError("config: epsilon must be positive");
  if (!(c.metric_params.cutoff_frac >= 0.0 &&
        c.metric_params.cutoff_frac <= 1.0))
    throw ValidationError("config: cutoff_frac must be in [0,1]");
  if (c.metric_params.win < 2 || c.metric_params.bins < 2)
    throw ValidationError("config: win and bins must be at least 2");
  if (!(c.lambda_xai >= 0.0))
    throw ValidationError("config: lambda_xai must be nonnegative");
  if (!(c.lr > 0.0)) throw ValidationError("config: lr must be positive");
  if (c.epochs < 0) throw ValidationError("config: epochs must be >= 0");
  if (c.batch < 1) throw ValidationError("config: batch must be >= 1");
  if (c.hidden < 1) throw ValidationError("config: hidden must be >= 1");
  if (c.n_train < 0 || c.n_eval < 0)
    throw ValidationError("config: sizes must be nonnegative");
  return c;
}

FileConfig load_file_config(const std::string& path) {
  if (path.empty()) return FileConfig{};
  const std::string bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void cmd_gen(const GenOptions& opt) {
  if (opt.count < 1) throw ValidationError("gen: count must be >= 1");
  if (opt.split != "train" && opt.split != "eval")
    throw ValidationError("gen: split must be 'train' or 'eval'");

  const fs::path out(opt.out_manifest);
  const fs::path img_dir_rel = out.stem().string() + "_images";

  std::vector<Sample> samples(static_cast<std::size_t>(opt.count));
  parallel_for(samples.size(), [&](std::size_t i) {
    samples[i] = gen_sample(mix64(opt.seed, static_cast<std::uint64_t>(i)),
                            SamplerConfig{}, false);
  });

  OutputTracker tracker;
  try {
    std::vector<std::string> rel_paths(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
      const fs::path rel = img_dir_rel / indexed_name("scene_", i, ".png");
      const fs::path abs = out.parent_path() / rel;
      save_image(abs, samples[i].image);
      tracker.add(abs);
      rel_paths[i] = rel.generic_string();
    });

    std::vector<ManifestRecord> records(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ManifestRecord& r = records[i];
      r.image_path = rel_paths[i];
      r.instruction = samples[i].instruction;
      r.action_now = samples[i].action_now;
      r.action_next = samples[i].action_next;
      r.spec = PerturbationSpec{};  // annotate as known clean
      r.explanation_ref = default_templates().clean;
      r.split = opt.split;
    }
    save_manifest(out, records);
  } catch (...) {
    tracker.rollback();
    throw;
  }
  if (!opt.quiet)
    std::cout << "wrote " << opt.count << " clean records -> "
              << opt.out_manifest << "\n";
}

void cmd_calibrate(const CalibrateOptions& opt) {
  FileConfig fc = load_file_config(opt.config_path);
  if (opt.quantile) fc.quantile = *opt.quantile;
  if (opt.epsilon) fc.epsilon = *opt.epsilon;
  if (opt.cutoff_frac) fc.metric_params.cutoff_frac = *opt.cutoff_frac;
  if (opt.win) fc.metric_params.win = *opt.win;
  if (opt.bins) fc.metric_params.bins = *opt.bins;
  // Re-check bounds after explicit overrides.
  if (!(fc.quantile > 0.0 && fc.quantile <= 1.0))
    throw ValidationError("calibrate: quantile must be in (0,1]");
  if (!(fc.epsilon > 0.0))
    throw ValidationError("calibrate: epsilon must be positive");
  if (!(fc.metric_params.cutoff_frac >= 0.0 &&
        fc.metric_params.cutoff_frac <= 1.0))
    throw ValidationError("calibrate: cutoff_frac must be in [0,1]");
  if (fc.metric_params.win < 2 || fc.metric_params.bins < 2)
    throw ValidationError("calibrate: win and bins must be at least 2");

  const fs::path manifest_path(opt.manifest);
  const std::vector<ManifestRecord> records = load_manifest(manifest_path);
  // Calibration uses every record not annotated as perturbed: explicitly
  // clean records and unannotated ones (the caller vouches for the corpus).
  std::vector<const ManifestRecord*> clean;
  for (const ManifestRecord& r : records)
    if (!r.spec.has_value() || r.spec->empty()) clean.push_back(&r);
  if (clean.size() < 2)
    throw CalibrationError(
        "calibrate: the manifest must contain at least 2 clean records");

  std::vector<std::array<double, 3>> feats(clean.size());
  std::vector<double> hf(clean.size()), ent(clean.size());
  parallel_for(clean.size(), [&](std::size_t i) {
    const Image img =
        load_image(resolve_manifest_path(manifest_path, clean[i]->image_path));
    feats[i] = image_hsv_feature(img);
    hf[i] = hf_energy_ratio(img, fc.metric_params.cutoff_frac);
    ent[i] = local_entropy_std(img, fc.metric_params.win,
                               fc.metric_params.bins);
  });

  Calibration cal;
  cal.stats = calibrate_stats(feats, fc.epsilon);
  std::vector<double> mahal(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i)
    mahal[i] = mahalanobis(feats[i], cal.stats);
  cal.thresholds = calibrate_thresholds(mahal, hf, ent, fc.quantile);
  cal.params = fc.metric_params;
  save_calibration(opt.out_stats, cal);
  if (!opt.quiet)
    std::cout << "calibrated on " << clean.size() << " clean images -> "
              << opt.out_stats << "\n";
}

void cmd_perturb(const PerturbOptions& opt) {
  const FileConfig fc = load_file_config(opt.config_path);
  SamplerConfig sampler = fc.sampler;
  sampler.p_clean = 0.0;  // every variant must actually be perturbed

  const fs::path in_path(opt.manifest_in);
  const fs::path out_path(opt.manifest_out);
  const std::vector<ManifestRecord> input = load_manifest(in_path);
  const fs::path img_dir_rel = out_path.stem().string() + "_images";

  std::vector<ManifestRecord> output(input.size() * 2);
  OutputTracker tracker;
  try {
    parallel_for(input.size(), [&](std::size_t i) {
      const ManifestRecord& rec = input[i];
      const fs::path src_abs = resolve_manifest_path(in_path, rec.image_path);
      const std::string src_ext = fs::path(rec.image_path).extension().string();

      // Byte-identical copy of the source image keeps the output dataset
      // self-contained without re-encoding.
      const fs::path clean_rel =
          img_dir_rel / indexed_name("r", i, "_clean" + src_ext);
      const fs::path clean_abs = out_path.parent_path() / clean_rel;
      atomic_write_bytes(clean_abs.string(), read_file_bytes(src_abs.string()));
      tracker.add(clean_abs);

      const Image img = load_image(src_abs);
      const PerturbationSpec spec =
          sample_spec(sampler, mix64(opt.seed, static_cast<std::uint64_t>(i)));
      const Image perturbed = apply_perturbation(img, spec);
      const fs::path pert_rel = img_dir_rel / indexed_name("r", i, "_pert.png");
      const fs::path pert_abs = out_path.parent_path() / pert_rel;
      save_image(pert_abs, perturbed);
      tracker.add(pert_abs);

      ManifestRecord clean_out = rec;
      clean_out.image_path = clean_rel.generic_string();
      output[2 * i] = std::move(clean_out);

      ManifestRecord pert_out;
      pert_out.image_path = pert_rel.generic_string();
      pert_out.clean_path = clean_rel.generic_string();
      pert_out.instruction = rec.instruction;
      pert_out.action_now = rec.action_now;
      pert_out.action_next = rec.action_next;
      pert_out.spec = spec;
      pert_out.explanation_ref = reference_explanation(spec);
      pert_out.split = rec.split;
      output[2 * i + 1] = std::move(pert_out);
    });
    save_manifest(out_path, output);
  } catch (...) {
    tracker.rollback();
    throw;
  }
  if (!opt.quiet)
    std::cout << "wrote " << output.size() << " records -> "
              << opt.manifest_out << "\n";
}

void cmd_detect(const DetectOptions& opt) {
  const fs::path manifest_path(opt.manifest);
  const std::vector<ManifestRecord> records = load_manifest(manifest_path);
  const Calibration cal = load_calibration(opt.stats);

  std::vector<EvidenceReport> reports(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const Image img =
        load_image(resolve_manifest_path(manifest_path, records[i].image_path));
    reports[i] = detect(img, cal.stats, cal.thresholds, cal.params);
  });

  // Per-flag confusion counts over annotated records only. Each flag's
  // positives are the records carrying its targeted transform (color flag:
  // hue shifts; noise flag: additive noise; spatial flag: anything that can
  // disturb spatial statistics, i.e. illumination or noise), its negatives
  // are the known-clean records, and annotated records carrying only other
  // transforms are neither. Unannotated records carry no truth and are
  // skipped entirely.
  struct Counts {
    long pos = 0, neg = 0, tp = 0, fp = 0;
  };
  Counts color, noise, spatial;
  auto tally = [](Counts& c, bool positive, bool negative, bool flagged) {
    if (positive) {
      ++c.pos;
      if (flagged) ++c.tp;
    } else if (negative) {
      ++c.neg;
      if (flagged) ++c.fp;
    }
  };

  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ManifestRecord& rec = records[i];
    const PerturbationSpec* truth =
        rec.spec.has_value() ? &*rec.spec : nullptr;
    out += detection_json(rec.image_path, reports[i], truth).dump();
    out += '\n';
    if (!truth) continue;
    const bool t_clean = truth->empty();
    tally(color, truth->use_color, t_clean, reports[i].flag_color);
    tally(noise, truth->use_noise, t_clean, reports[i].flag_noise);
    tally(spatial, truth->use_illum || truth->use_noise, t_clean,
          reports[i].flag_spatial);
  }

  nlohmann::ordered_json summary;
  summary["records"] = records.size();
  nlohmann::ordered_json tpr, fpr;
  auto rate = [](long num, long den) {
    return static_cast<double>(num) / static_cast<double>(den);
  };
  if (color.pos > 0) tpr["color"] = rate(color.tp, color.pos);
  if (noise.pos > 0) tpr["noise"] = rate(noise.tp, noise.pos);
  if (spatial.pos > 0) tpr["spatial"] = rate(spatial.tp, spatial.pos);
  if (color.neg > 0) fpr["color"] = rate(color.fp, color.neg);
  if (noise.neg > 0) fpr["noise"] = rate(noise.fp, noise.neg);
  if (spatial.neg > 0) fpr["spatial"] = rate(spatial.fp, spatial.neg);
  if (!tpr.empty()) summary["tpr"] = tpr;
  if (!fpr.empty()) summary["fpr"] = fpr;
  nlohmann::ordered_json summary_line;
  summary_line["summary"] = std::move(summary);
  out += summary_line.dump();
  out += '\n';

  atomic_write_text(opt.report_out, out);
  if (!opt.quiet) std::cout << summary_line.dump() << "\n";
}

void cmd_experiment(const ExperimentOptions& opt) {
  FileConfig fc = load_file_config(opt.config_path);
  ExperimentConfig cfg;
  cfg.sampler = fc.sampler;
  cfg.metric_params = fc.metric_params;
  cfg.quantile = fc.quantile;
  cfg.epsilon = fc.epsilon;
  cfg.lambda_xai = opt.lambda_xai.value_or(fc.lambda_xai);
  cfg.lr = opt.lr.value_or(fc.lr);
  cfg.epochs = opt.epochs.value_or(fc.epochs);
  cfg.batch = opt.batch.value_or(fc.batch);
  cfg.hidden = opt.hidden.value_or(fc.hidden);
  ExperimentSizes sizes;
  sizes.n_train = opt.n_train.value_or(fc.n_train);
  sizes.n_eval = opt.n_eval.value_or(fc.n_eval);
  if (sizes.n_train < 2 || sizes.n_eval < 1)
    throw ValidationError("experiment: sizes too small to train and evaluate");
  if (!(cfg.lr > 0.0)) throw ValidationError("experiment: lr must be positive");
  if (cfg.epochs < 0 || cfg.batch < 1 || cfg.hidden < 1)
    throw ValidationError("experiment: invalid training configuration");

  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) {
    const std::uint64_t base = opt.base_seed.value_or(1);
    seeds = {base, base + 1, base + 2};
  }

  std::vector<ExperimentResult> results;
  results.reserve(seeds.size());
  for (const std::uint64_t s : seeds)
    results.push_back(run_experiment(s, sizes, cfg));

  // Cross-seed means per mode, in fixed mode order.
  std::vector<ModeAccumulator> acc(3);
  for (const ExperimentResult& r : results) {
    for (std::size_t m = 0; m < r.modes.size(); ++m) {
      acc[m].current_l1 += r.modes[m].metrics.current_l1;
      acc[m].next_l1 += r.modes[m].metrics.next_l1;
      acc[m].xai_acc += r.modes[m].metrics.xai_acc;
      acc[m].xai_reported = r.modes[m].xai_reported;
    }
  }
  const double inv = 1.0 / static_cast<double>(results.size());

  nlohmann::ordered_json report;
  report["seeds"] = seeds;
  nlohmann::ordered_json modes;
  static const Mode kOrder[3] = {Mode::kDefault, Mode::kAugmented,
                                 Mode::kProposed};
  for (std::size_t m = 0; m < 3; ++m)
    modes[mode_name(kOrder[m])] =
        mode_metrics_json(acc[m].current_l1 * inv, acc[m].next_l1 * inv,
                          acc[m].xai_reported, acc[m].xai_acc * inv);
  report["modes"] = std::move(modes);
  nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
  for (const ExperimentResult& r : results) {
    nlohmann::ordered_json entry;
    entry["seed"] = r.seed;
    nlohmann::ordered_json entry_modes;
    for (const ModeResult& mr : r.modes)
      entry_modes[mode_name(mr.mode)] =
          mode_metrics_json(mr.metrics.current_l1, mr.metrics.next_l1,
                            mr.xai_reported, mr.metrics.xai_acc);
    entry["modes"] = std::move(entry_modes);
    per_seed.push_back(std::move(entry));
  }
  report["per_seed"] = std::move(per_seed);
  report["reference_full_scale"] = reference_block();
  nlohmann::ordered_json config_echo;
  config_echo["sizes"] = {{"n_train", sizes.n_train}, {"n_eval", sizes.n_eval}};
  config_echo["train"] = {{"lambda_xai", cfg.lambda_xai},
                          {"lr", cfg.lr},
                          {"epochs", cfg.epochs},
                          {"batch", cfg.batch},
                          {"hidden", cfg.hidden}};
  config_echo["sampler"] = {
      {"hue_range", {cfg.sampler.hue_range.first, cfg.sampler.hue_range.second}},
      {"gain_range",
       {cfg.sampler.gain_range.first, cfg.sampler.gain_range.second}},
      {"sigma_range",
       {cfg.sampler.sigma_range.first, cfg.sampler.sigma_range.second}},
      {"p_clean", cfg.sampler.p_clean}};
  config_echo["metric_params"] = {{"cutoff_frac", cfg.metric_params.cutoff_frac},
                                  {"win", cfg.metric_params.win},
                                  {"bins", cfg.metric_params.bins}};
  config_echo["quantile"] = cfg.quantile;
  config_echo["epsilon"] = cfg.epsilon;
  report["config"] = std::move(config_echo);

  atomic_write_text(opt.out_report, report.dump(2) + "\n");

  if (!opt.quiet) {
    std::printf("%-12s %-10s %-12s %-10s\n", "Mode", "XAI Acc", "Current L1",
                "Next L1");
    for (std::size_t m = 0; m < 3; ++m) {
      char xai[16];
      if (acc[m].xai_reported)
        std::snprintf(xai, sizeof(xai), "%.4f", acc[m].xai_acc * inv);
      else
        std::snprintf(xai, sizeof(xai), "-");
      std::printf("%-12s %-10s %-12.4f %-10.4f\n", mode_name(kOrder[m]), xai,
                  acc[m].current_l1 * inv, acc[m].next_l1 * inv);
    }
    std::printf("report -> %s\n", opt.out_report.c_str());
  }
}

void cmd_explain(const ExplainOptions& opt) {
  const Calibration cal = load_calibration(opt.stats);
  const Image img = load_image(opt.image);
  const EvidenceReport report =
      detect(img, cal.stats, cal.thresholds, cal.params);
  std::cout << detection_json(opt.image, report, nullptr).dump(2) << "\n";
}

}  // namespace ev3
