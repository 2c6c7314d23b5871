#pragma once

#include <array>
#include <string>
#include <vector>

#include "evidence3/image.hpp"

#include "json.hpp"

namespace ev3 {

// Reference distribution of the per-image mean-HSV feature over a clean
// corpus. Hue enters as the circular-mean angle rescaled to [0, 1).
struct HsvStats {
  std::array<double, 3> mean{};
  std::array<std::array<double, 3>, 3> cov{};
  double epsilon = 1e-6;  // diagonal regularizer; cov + epsilon*I must be SPD
  int n_images = 0;
};

// Per-metric decision thresholds, each the nearest-rank quantile of the
// clean-corpus metric distribution.
struct Thresholds {
  double tau_mahal = 0.0;
  double tau_hf = 0.0;
  double tau_entstd = 0.0;
  double quantile = 0.99;
};

struct MetricParams {
  double cutoff_frac = 0.5;  // radial frequency cutoff, fraction of r_max
  int win = 16;              // entropy window side, non-overlapping tiles
  int bins = 32;             // histogram bins over [0, 1]
};

// The three metric values with their strict-threshold verdicts.
struct EvidenceReport {
  double d_mahal = 0.0;
  double hf_ratio = 0.0;
  double ent_std = 0.0;
  bool flag_color = false;
  bool flag_noise = false;
  bool flag_spatial = false;
};

// Everything the detector needs at run time; serialized as the stats file.
struct Calibration {
  HsvStats stats;
  Thresholds thresholds;
  MetricParams params;
};

// Per-image feature: (circular-mean hue deg / 360, mean saturation, mean value).
std::array<double, 3> image_hsv_feature(const Image& img);

// Arithmetic mean and unbiased (n-1) covariance of the clean features.
// Throws CalibrationError with fewer than 2 vectors.
HsvStats calibrate_stats(const std::vector<std::array<double, 3>>& clean_features,
                         double epsilon);

// sqrt((x-mu)^T (Sigma + eps I)^-1 (x-mu)) via Cholesky; no explicit inverse.
// Throws CalibrationError if the regularized covariance is not SPD.
double mahalanobis(const std::array<double, 3>& x, const HsvStats& stats);

// Fraction of non-DC spectral power of the luminance plane beyond
// cutoff_frac * r_max, where r(u,v) uses the folded normalized frequencies
// and r_max = sqrt(0.5^2 + 0.5^2). Zero-total-energy images return 0.
// Throws ValidationError for images smaller than 8x8.
double hf_energy_ratio(const Image& img, double cutoff_frac);

// Population std of per-window Shannon entropies (bits) over non-overlapping
// win x win tiles of the luminance plane; remainder rows/cols are discarded.
// Throws ValidationError if the image is smaller than one window.
double local_entropy_std(const Image& img, int win, int bins);

// Nearest-rank quantile: element ceil(q*n) (1-based) of the sorted list.
// Throws CalibrationError on an empty list.
double nearest_rank_quantile(std::vector<double> values, double q);

Thresholds calibrate_thresholds(const std::vector<double>& mahal_samples,
                                const std::vector<double>& hf_samples,
                                const std::vector<double>& entstd_samples,
                                double quantile);

// Computes all three metrics and applies the strict > decision rule.
EvidenceReport detect(const Image& img, const HsvStats& stats, const Thresholds& thr,
                      const MetricParams& params);

// Stats-file serialization (schema is stable; numbers round-trip exactly).
nlohmann::ordered_json calibration_to_json(const Calibration& cal);
Calibration calibration_from_json(const nlohmann::json& j);
void save_calibration(const std::string& path, const Calibration& cal);
Calibration load_calibration(const std::string& path);

}  // namespace ev3
