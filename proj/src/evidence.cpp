#include "evidence3/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "evidence3/errors.hpp"
#include "evidence3/fft.hpp"
#include "evidence3/io_util.hpp"

namespace ev3 {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Cholesky factor of a 3x3 symmetric matrix; false if not positive definite.
bool cholesky3(const std::array<std::array<double, 3>, 3>& a,
               std::array<std::array<double, 3>, 3>& l) {
  l = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (sum <= 0.0 || !std::isfinite(sum)) return false;
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  return true;
}

}  // namespace

std::array<double, 3> image_hsv_feature(const Image& img) {
  double cos_sum = 0.0, sin_sum = 0.0, s_sum = 0.0, v_sum = 0.0;
  std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double* px = &img.data[3 * i];
    HsvPixel hsv = rgb_to_hsv({px[0], px[1], px[2]});
    double rad = hsv.h * (kPi / 180.0);
    cos_sum += std::cos(rad);
    sin_sum += std::sin(rad);
    s_sum += hsv.s;
    v_sum += hsv.v;
  }
  double angle = 0.0;
  // Circular mean; an (almost) cancelled resultant leaves hue undefined, so
  // fall back to the h = 0 convention.
  if (std::hypot(cos_sum, sin_sum) > 1e-9 * static_cast<double>(n)) {
    angle = std::atan2(sin_sum, cos_sum) * (180.0 / kPi);
    angle = std::fmod(angle + 360.0, 360.0);
    if (angle >= 360.0) angle = 0.0;
  }
  double inv_n = 1.0 / static_cast<double>(n);
  return {angle / 360.0, s_sum * inv_n, v_sum * inv_n};
}

HsvStats calibrate_stats(const std::vector<std::array<double, 3>>& clean_features,
                         double epsilon) {
  const std::size_t n = clean_features.size();
  if (n < 2) {
    throw CalibrationError("calibrate_stats: at least 2 feature vectors required");
  }
  HsvStats stats;
  stats.epsilon = epsilon;
  stats.n_images = static_cast<int>(n);

  for (const auto& f : clean_features) {
    for (int k = 0; k < 3; ++k) stats.mean[k] += f[k];
  }
  for (int k = 0; k < 3; ++k) stats.mean[k] /= static_cast<double>(n);

  for (const auto& f : clean_features) {
    double d[3] = {f[0] - stats.mean[0], f[1] - stats.mean[1], f[2] - stats.mean[2]};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) stats.cov[i][j] += d[i] * d[j];
    }
  }
  double inv = 1.0 / static_cast<double>(n - 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) stats.cov[i][j] *= inv;
  }
  return stats;
}

double mahalanobis(const std::array<double, 3>& x, const HsvStats& stats) {
  std::array<std::array<double, 3>, 3> reg = stats.cov;
  for (int i = 0; i < 3; ++i) reg[i][i] += stats.epsilon;

  std::array<std::array<double, 3>, 3> l;
  if (!cholesky3(reg, l)) {
    throw CalibrationError("mahalanobis: regularized covariance is not positive definite");
  }

  // d^2 = || L^-1 (x - mu) ||^2
  double diff[3] = {x[0] - stats.mean[0], x[1] - stats.mean[1], x[2] - stats.mean[2]};
  double y[3];
  for (int i = 0; i < 3; ++i) {
    double sum = diff[i];
    for (int k = 0; k < i; ++k) sum -= l[i][k] * y[k];
    y[i] = sum / l[i][i];
  }
  return std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
}

double hf_energy_ratio(const Image& img, double cutoff_frac) {
  if (img.width < 8 || img.height < 8) {
    throw ValidationError("hf_energy_ratio: image must be at least 8x8");
  }
  Plane lum = luminance_plane(img);
  std::vector<fft::Complex> spec = fft::dft2(lum);

  const int h = img.height;
  const int w = img.width;
  const double r_max = std::sqrt(0.5);  // sqrt(0.5^2 + 0.5^2)
  const double cutoff = cutoff_frac * r_max;

  double e_total = 0.0, e_high = 0.0, e_dc = 0.0;
  for (int u = 0; u < h; ++u) {
    double fu = static_cast<double>(std::min(u, h - u)) / h;
    for (int v = 0; v < w; ++v) {
      double power = std::norm(spec[static_cast<std::size_t>(u) * w + v]);
      if (u == 0 && v == 0) {
        e_dc = power;
        continue;
      }
      double fv = static_cast<double>(std::min(v, w - v)) / w;
      double r = std::sqrt(fu * fu + fv * fv);
      e_total += power;
      if (r > cutoff) e_high += power;
    }
  }

  // Constant images carry all energy in DC; what remains in the other bins
  // is transform roundoff, which must read as zero rather than as a ratio
  // of noise terms.
  if (e_total <= 1e-18 * e_dc || e_total == 0.0) return 0.0;
  return e_high / e_total;
}

double local_entropy_std(const Image& img, int win, int bins) {
  if (win < 2 || bins < 2) {
    throw ValidationError("local_entropy_std: win and bins must each be >= 2");
  }
  if (img.width < win || img.height < win) {
    throw ValidationError("local_entropy_std: image smaller than one window");
  }
  Plane lum = luminance_plane(img);
  const int tiles_x = img.width / win;
  const int tiles_y = img.height / win;
  const double inv_count = 1.0 / (static_cast<double>(win) * win);
  const double inv_ln2 = 1.0 / std::log(2.0);

  std::vector<double> entropies;
  entropies.reserve(static_cast<std::size_t>(tiles_x) * tiles_y);
  std::vector<int> hist(static_cast<std::size_t>(bins));

  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      std::fill(hist.begin(), hist.end(), 0);
      for (int y = ty * win; y < (ty + 1) * win; ++y) {
        for (int x = tx * win; x < (tx + 1) * win; ++x) {
          int b = static_cast<int>(lum.at(x, y) * bins);
          if (b >= bins) b = bins - 1;
          if (b < 0) b = 0;
          ++hist[b];
        }
      }
      double entropy = 0.0;
      for (int b = 0; b < bins; ++b) {
        if (hist[b] == 0) continue;  // 0 log 0 = 0
        double p = hist[b] * inv_count;
        entropy -= p * std::log(p) * inv_ln2;
      }
      entropies.push_back(entropy);
    }
  }

  double mean = 0.0;
  for (double e : entropies) mean += e;
  mean /= static_cast<double>(entropies.size());
  double var = 0.0;
  for (double e : entropies) var += (e - mean) * (e - mean);
  var /= static_cast<double>(entropies.size());  // population std
  return std::sqrt(var);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw CalibrationError("nearest_rank_quantile: empty sample list");
  }
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

Thresholds calibrate_thresholds(const std::vector<double>& mahal_samples,
                                const std::vector<double>& hf_samples,
                                const std::vector<double>& entstd_samples,
                                double quantile) {
  Thresholds thr;
  thr.quantile = quantile;
  thr.tau_mahal = nearest_rank_quantile(mahal_samples, quantile);
  thr.tau_hf = nearest_rank_quantile(hf_samples, quantile);
  thr.tau_entstd = nearest_rank_quantile(entstd_samples, quantile);
  return thr;
}

EvidenceReport detect(const Image& img, const HsvStats& stats, const Thresholds& thr,
                      const MetricParams& params) {
  EvidenceReport report;
  report.d_mahal = mahalanobis(image_hsv_feature(img), stats);
  report.hf_ratio = hf_energy_ratio(img, params.cutoff_frac);
  report.ent_std = local_entropy_std(img, params.win, params.bins);
  report.flag_color = report.d_mahal > thr.tau_mahal;
  report.flag_noise = report.hf_ratio > thr.tau_hf;
  report.flag_spatial = report.ent_std > thr.tau_entstd;
  return report;
}

nlohmann::ordered_json calibration_to_json(const Calibration& cal) {
  nlohmann::ordered_json j;
  j["mean"] = cal.stats.mean;
  j["cov"] = cal.stats.cov;
  j["epsilon"] = cal.stats.epsilon;
  j["n_images"] = cal.stats.n_images;
  j["thresholds"] = {{"tau_mahal", cal.thresholds.tau_mahal},
                     {"tau_hf", cal.thresholds.tau_hf},
                     {"tau_entstd", cal.thresholds.tau_entstd},
                     {"quantile", cal.thresholds.quantile}};
  j["metric_params"] = {{"cutoff_frac", cal.params.cutoff_frac},
                        {"win", cal.params.win},
                        {"bins", cal.params.bins}};
  return j;
}

Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration cal;
  cal.stats.mean = j.at("mean").get<std::array<double, 3>>();
  cal.stats.cov = j.at("cov").get<std::array<std::array<double, 3>, 3>>();
  cal.stats.epsilon = j.at("epsilon").get<double>();
  cal.stats.n_images = j.at("n_images").get<int>();
  const auto& t = j.at("thresholds");
  cal.thresholds.tau_mahal = t.at("tau_mahal").get<double>();
  cal.thresholds.tau_hf = t.at("tau_hf").get<double>();
  cal.thresholds.tau_entstd = t.at("tau_entstd").get<double>();
  cal.thresholds.quantile = t.at("quantile").get<double>();
  const auto& m = j.at("metric_params");
  cal.params.cutoff_frac = m.at("cutoff_frac").get<double>();
  cal.params.win = m.at("win").get<int>();
  cal.params.bins = m.at("bins").get<int>();
  return cal;
}

void save_calibration(const std::string& path, const Calibration& cal) {
  atomic_write_text(path, calibration_to_json(cal).dump(2) + "\n");
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stats file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CalibrationError("malformed stats file " + path + ": " + e.what());
  }
  try {
    return calibration_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw CalibrationError("invalid stats file " + path + ": " + e.what());
  }
}

}  // namespace ev3
