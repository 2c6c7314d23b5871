#include "evidence3/vlatoy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evidence3/errors.hpp"
#include "evidence3/explain.hpp"
#include "evidence3/parallel.hpp"

namespace ev3 {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

Rgb iso_color(double luma, double angle_deg, double chroma) {
  // Two unit directions spanning the plane orthogonal to the luma weights:
  // u1 ~ (G, -R, 0), u2 ~ (0, B, -G). Any offset in their span leaves
  // R*r + G*g + B*b unchanged, so the scene's luminance stays flat.
  static const double n1 = std::sqrt(kLumaG * kLumaG + kLumaR * kLumaR);
  static const double n2 = std::sqrt(kLumaB * kLumaB + kLumaG * kLumaG);
  const double u1r = kLumaG / n1, u1g = -kLumaR / n1, u1b = 0.0;
  const double u2r = 0.0, u2g = kLumaB / n2, u2b = -kLumaG / n2;
  const double rad = angle_deg * (3.14159265358979323846 / 180.0);
  const double c = std::cos(rad), s = std::sin(rad);
  return {clamp01(luma + chroma * (c * u1r + s * u2r)),
          clamp01(luma + chroma * (c * u1g + s * u2g)),
          clamp01(luma + chroma * (c * u1b + s * u2b))};
}

SceneParams draw_scene(Rng& rng) {
  SceneParams p;
  // The base-value band is narrow enough that every sampled illumination
  // gain pushes the mean value channel outside it. The disc differs from
  // the background by a small chroma offset, so localization is exact on
  // clean frames but sits near the noise floor once a perturbation lands;
  // how well it can be recovered then depends on the transform in play.
  p.base_value = rng.uniform(0.52, 0.56);
  p.bg_angle_deg = rng.uniform(210.0, 230.0);
  p.bg_chroma = rng.uniform(0.10, 0.16);
  const double ang_offset = rng.uniform(20.0, 45.0);
  const double ang_dir = rng.next_bool() ? 1.0 : -1.0;
  p.disc_angle_deg = p.bg_angle_deg + ang_dir * ang_offset;
  const double chroma_offset = rng.uniform(0.01, 0.03);
  const double chroma_dir = rng.next_bool() ? 1.0 : -1.0;
  p.disc_chroma =
      std::clamp(p.bg_chroma + chroma_dir * chroma_offset, 0.02, 0.30);
  p.cx = rng.uniform(16.0, 48.0);
  p.cy = rng.uniform(16.0, 48.0);
  p.radius = rng.uniform(6.0, 12.0);
  return p;
}

Image render_scene(const SceneParams& p) {
  const Rgb bg = iso_color(p.base_value, p.bg_angle_deg, p.bg_chroma);
  const Rgb disc = iso_color(p.base_value, p.disc_angle_deg, p.disc_chroma);
  Image img = Image::filled(kImageSize, kImageSize, bg);
  const double r2 = p.radius * p.radius;
  for (int y = 0; y < kImageSize; ++y) {
    const double dy = (y + 0.5) - p.cy;
    for (int x = 0; x < kImageSize; ++x) {
      const double dx = (x + 0.5) - p.cx;
      if (dx * dx + dy * dy <= r2) img.set_pixel(x, y, disc);
    }
  }
  return img;
}

void scene_actions(const SceneParams& p,
                   std::array<double, kActionDim>& action_now,
                   std::array<double, kActionDim>& action_next) {
  action_now = {p.cx / kImageSize, p.cy / kImageSize, 0.5, 0.5, 0.5, 0.5, 1.0};
  action_next = action_now;
  action_next[0] += 0.1 * (0.5 - action_now[0]);
  action_next[1] += 0.1 * (0.5 - action_now[1]);
  action_next[6] = 0.0;  // gripper closes on the next step
}

Sample gen_sample(std::uint64_t scene_seed, const SamplerConfig& cfg,
                  bool perturbed) {
  Rng rng(scene_seed);
  const SceneParams params = draw_scene(rng);
  Sample s;
  s.image = render_scene(params);
  s.instruction = "Move the gripper to the disc and grasp it.";
  scene_actions(params, s.action_now, s.action_next);
  if (perturbed) {
    SamplerConfig forced = cfg;
    forced.p_clean = 0.0;
    s.spec = sample_spec(forced, rng.next_u64());
    s.image = apply_perturbation(s.image, s.spec);
  }
  s.xai_class = explanation_class(s.spec);
  return s;
}

std::vector<double> featurize(const Sample& s, const Calibration& cal,
                              bool use_cue) {
  if (s.image.width != kImageSize || s.image.height != kImageSize ||
      !s.image.shape_valid())
    throw ValidationError("featurize: expected a 64x64 RGB image");

  std::vector<double> f(kFeatureDim, 0.0);
  constexpr int grid = kImageSize / kBlockSize;
  constexpr double inv_count = 1.0 / (kBlockSize * kBlockSize);
  for (int c = 0; c < 3; ++c) {
    for (int by = 0; by < grid; ++by) {
      for (int bx = 0; bx < grid; ++bx) {
        double sum = 0.0;
        for (int y = by * kBlockSize; y < (by + 1) * kBlockSize; ++y)
          for (int x = bx * kBlockSize; x < (bx + 1) * kBlockSize; ++x)
            sum += s.image.data[s.image.pixel_index(x, y) + c];
        f[static_cast<std::size_t>(c) * grid * grid + by * grid + bx] =
            sum * inv_count;
      }
    }
  }
  if (use_cue) {
    const EvidenceReport r =
        detect(s.image, cal.stats, cal.thresholds, cal.params);
    f[192] = r.d_mahal;
    f[193] = r.hf_ratio;
    f[194] = r.ent_std;
    f[195] = r.flag_color ? 1.0 : 0.0;
    f[196] = r.flag_noise ? 1.0 : 0.0;
    f[197] = r.flag_spatial ? 1.0 : 0.0;
  }
  return f;
}

std::pair<double, double> l1_action_loss(
    const std::array<double, 14>& pred, const std::array<double, 14>& target) {
  double current = 0.0, next = 0.0;
  for (int i = 0; i < kActionDim; ++i) {
    current += std::abs(pred[i] - target[i]);
    next += std::abs(pred[i + kActionDim] - target[i + kActionDim]);
  }
  return {current / kActionDim, next / kActionDim};
}

double xai_ce_loss(const std::array<double, kNumClasses>& logits, int cls) {
  if (cls < 0 || cls >= kNumClasses)
    throw ValidationError("xai_ce_loss: class id must be in [0,7]");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum_exp = 0.0;
  for (double v : logits) sum_exp += std::exp(v - m);
  return std::log(sum_exp) - (logits[cls] - m);
}

double total_loss(double l_act, double l_xai, double lambda_xai) {
  return lambda_xai * l_xai + l_act;
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kDefault:
      return "default";
    case Mode::kAugmented:
      return "augmented";
    case Mode::kProposed:
      return "proposed";
  }
  return "unknown";
}

Mode mode_from_name(const std::string& name) {
  if (name == "default") return Mode::kDefault;
  if (name == "augmented") return Mode::kAugmented;
  if (name == "proposed") return Mode::kProposed;
  throw ValidationError("unknown mode '" + name +
                        "' (expected default, augmented, or proposed)");
}

ToyModel::ToyModel(int input_dim_, int hidden_, std::uint64_t init_seed)
    : input_dim(input_dim_), hidden(hidden_) {
  init(init_seed);
}

void ToyModel::init(std::uint64_t seed) {
  params.assign(param_count(), 0.0);
  input_offset.assign(input_dim, 0.0);
  input_scale.assign(input_dim, 1.0);
  Rng rng(seed);
  auto fill_uniform = [&rng, this](std::size_t offset, std::size_t count,
                                   int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i)
      params[offset + i] = rng.uniform(-a, a);
  };
  fill_uniform(w1_offset(), static_cast<std::size_t>(hidden) * input_dim,
               input_dim, hidden);
  fill_uniform(wa_offset(), static_cast<std::size_t>(2 * kActionDim) * hidden,
               hidden, 2 * kActionDim);
  fill_uniform(wx_offset(), static_cast<std::size_t>(kNumClasses) * hidden,
               hidden, kNumClasses);
}

void ToyModel::normalize(const double* feature, double* out) const {
  for (int d = 0; d < input_dim; ++d)
    out[d] = (feature[d] - input_offset[d]) * input_scale[d];
}

void ToyModel::forward_core(const double* norm_feature, double* hidden_out,
                            double* action_out, double* logits_out) const {
  const double* w1 = params.data() + w1_offset();
  const double* b1 = params.data() + b1_offset();
  const double* wa = params.data() + wa_offset();
  const double* ba = params.data() + ba_offset();
  const double* wx = params.data() + wx_offset();
  const double* bx = params.data() + bx_offset();

  for (int j = 0; j < hidden; ++j) {
    double z = b1[j];
    const double* row = w1 + static_cast<std::size_t>(j) * input_dim;
    for (int d = 0; d < input_dim; ++d) z += row[d] * norm_feature[d];
    hidden_out[j] = std::tanh(z);
  }
  for (int o = 0; o < 2 * kActionDim; ++o) {
    double z = ba[o];
    const double* row = wa + static_cast<std::size_t>(o) * hidden;
    for (int j = 0; j < hidden; ++j) z += row[j] * hidden_out[j];
    action_out[o] = z;
  }
  for (int k = 0; k < kNumClasses; ++k) {
    double z = bx[k];
    const double* row = wx + static_cast<std::size_t>(k) * hidden;
    for (int j = 0; j < hidden; ++j) z += row[j] * hidden_out[j];
    logits_out[k] = z;
  }
}

void ToyModel::forward(const double* feature, double* hidden_out,
                       double* action_out, double* logits_out) const {
  thread_local std::vector<double> norm;
  norm.resize(input_dim);
  normalize(feature, norm.data());
  forward_core(norm.data(), hidden_out, action_out, logits_out);
}

double loss_and_grad(const ToyModel& model, const Batch& batch,
                     double lambda_xai, std::vector<double>* grad) {
  if (batch.size == 0) throw TrainingError("loss_and_grad: empty batch");
  const int D = model.input_dim;
  const int H = model.hidden;
  const int B = static_cast<int>(batch.size);
  const bool with_xai = lambda_xai > 0.0;

  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMat = Eigen::Map<const RowMat>;
  using ConstVec = Eigen::Map<const Eigen::VectorXd>;

  ConstMat w1(model.params.data() + model.w1_offset(), H, D);
  ConstVec b1(model.params.data() + model.b1_offset(), H);
  ConstMat wa(model.params.data() + model.wa_offset(), 2 * kActionDim, H);
  ConstVec ba(model.params.data() + model.ba_offset(), 2 * kActionDim);
  ConstMat wx(model.params.data() + model.wx_offset(), kNumClasses, H);
  ConstVec bx(model.params.data() + model.bx_offset(), kNumClasses);

  RowMat inputs(B, D);
  for (int n = 0; n < B; ++n)
    model.normalize(batch.features.data() + static_cast<std::size_t>(n) * D,
                    inputs.row(n).data());
  ConstMat targets(batch.targets.data(), B, 2 * kActionDim);

  const RowMat hidden =
      (((inputs * w1.transpose()).rowwise() + b1.transpose()).array().tanh())
          .matrix();
  const RowMat action_diff =
      ((hidden * wa.transpose()).rowwise() + ba.transpose()) - targets;
  double loss_sum =
      action_diff.array().abs().sum() / static_cast<double>(kActionDim);

  RowMat dlog;  // lambda-scaled softmax-minus-onehot rows
  if (with_xai) {
    RowMat logits = (hidden * wx.transpose()).rowwise() + bx.transpose();
    if (grad) dlog.resize(B, kNumClasses);
    for (int n = 0; n < B; ++n) {
      const int cls = batch.classes[n];
      if (cls < 0 || cls >= kNumClasses)
        throw ValidationError("loss_and_grad: class id must be in [0,7]");
      const double m = logits.row(n).maxCoeff();
      const Eigen::Array<double, 1, Eigen::Dynamic> e =
          (logits.row(n).array() - m).exp();
      const double sum_exp = e.sum();
      loss_sum +=
          lambda_xai * (std::log(sum_exp) - (logits(n, cls) - m));
      if (grad) {
        dlog.row(n) = (lambda_xai / sum_exp) * e.matrix();
        dlog(n, cls) -= lambda_xai;
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size);
  if (grad) {
    grad->assign(model.params.size(), 0.0);
    using MutMat = Eigen::Map<RowMat>;
    using MutVec = Eigen::Map<Eigen::VectorXd>;
    const RowMat dact =
        action_diff.unaryExpr([](double v) {
          return static_cast<double>(sign_of(v)) / kActionDim;
        });

    MutMat gwa(grad->data() + model.wa_offset(), 2 * kActionDim, H);
    gwa = dact.transpose() * hidden;
    MutVec gba(grad->data() + model.ba_offset(), 2 * kActionDim);
    gba = dact.colwise().sum().transpose();

    // Backpropagate through both heads into the shared hidden layer.
    RowMat dhid = dact * wa;
    if (with_xai) {
      MutMat gwx(grad->data() + model.wx_offset(), kNumClasses, H);
      gwx = dlog.transpose() * hidden;
      MutVec gbx(grad->data() + model.bx_offset(), kNumClasses);
      gbx = dlog.colwise().sum().transpose();
      dhid += dlog * wx;
    }
    const RowMat dz =
        (dhid.array() * (1.0 - hidden.array().square())).matrix();
    MutMat gw1(grad->data() + model.w1_offset(), H, D);
    gw1 = dz.transpose() * inputs;
    MutVec gb1(grad->data() + model.b1_offset(), H);
    gb1 = dz.colwise().sum().transpose();

    for (std::size_t i = 0; i < model.params.size(); ++i)
      (*grad)[i] *= inv_n;
  }
  return loss_sum * inv_n;
}

namespace {

// Featurizes the given samples in parallel into a row-major matrix.
std::vector<double> featurize_all(const std::vector<const Sample*>& samples,
                                  const Calibration& cal, bool use_cue) {
  std::vector<double> rows(samples.size() * kFeatureDim);
  parallel_for(samples.size(), [&](std::size_t i) {
    const std::vector<double> f = featurize(*samples[i], cal, use_cue);
    std::copy(f.begin(), f.end(), rows.begin() + i * kFeatureDim);
  });
  return rows;
}

}  // namespace

ToyModel train(const std::vector<Sample>& data, const TrainConfig& cfg,
               const Calibration& cal) {
  if (!(cfg.lambda_xai >= 0.0))
    throw ValidationError("train: lambda_xai must be nonnegative");
  if (!(cfg.lr > 0.0)) throw ValidationError("train: lr must be positive");
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (cfg.batch < 1) throw ValidationError("train: batch must be >= 1");
  if (cfg.hidden < 1) throw ValidationError("train: hidden must be >= 1");

  std::vector<const Sample*> selected;
  selected.reserve(data.size());
  for (const Sample& s : data) {
    if (cfg.mode == Mode::kDefault && !s.spec.empty()) continue;
    selected.push_back(&s);
  }
  if (selected.empty())
    throw TrainingError("train: no samples available for mode " +
                        std::string(mode_name(cfg.mode)));

  const bool use_cue = cfg.mode == Mode::kProposed;
  const double lambda = cfg.mode == Mode::kProposed ? cfg.lambda_xai : 0.0;
  const std::vector<double> features = featurize_all(selected, cal, use_cue);

  const std::size_t n = selected.size();
  std::vector<double> targets(n * 2 * kActionDim);
  std::vector<int> classes(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kActionDim; ++k) {
      targets[i * 2 * kActionDim + k] = selected[i]->action_now[k];
      targets[i * 2 * kActionDim + kActionDim + k] =
          selected[i]->action_next[k];
    }
    classes[i] = selected[i]->xai_class;
  }

  ToyModel model(kFeatureDim, cfg.hidden, mix64(cfg.seed, 1));

  // Standardize each input dimension to zero mean / unit variance as
  // measured on the training set, so low-variance block means and
  // wide-ranging cue magnitudes reach the trunk at comparable scales.
  // Near-constant dimensions keep scale 1 to avoid noise amplification.
  for (int d = 0; d < kFeatureDim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += features[i * kFeatureDim + d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = features[i * kFeatureDim + d] - mean;
      var += delta * delta;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.input_offset[d] = mean;
    model.input_scale[d] = sd > 1e-9 ? 1.0 / sd : 1.0;
  }

  std::vector<double> grad;
  std::vector<std::size_t> order(n);
  Batch batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix64(mix64(cfg.seed, 2), static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t b = std::min<std::size_t>(cfg.batch, n - start);
      batch.size = b;
      batch.features.assign(b * kFeatureDim, 0.0);
      batch.targets.assign(b * 2 * kActionDim, 0.0);
      batch.classes.assign(b, 0);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(features.begin() + src * kFeatureDim, kFeatureDim,
                    batch.features.begin() + r * kFeatureDim);
        std::copy_n(targets.begin() + src * 2 * kActionDim, 2 * kActionDim,
                    batch.targets.begin() + r * 2 * kActionDim);
        batch.classes[r] = classes[src];
      }
      loss_and_grad(model, batch, lambda, &grad);
      for (std::size_t i = 0; i < model.params.size(); ++i)
        model.params[i] -= cfg.lr * grad[i];
    }
  }
  return model;
}

EvalMetrics evaluate(const ToyModel& model, const std::vector<Sample>& data,
                     const Calibration& cal, bool use_cue) {
  if (data.empty()) throw TrainingError("evaluate: empty sample list");
  std::vector<const Sample*> all(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) all[i] = &data[i];
  const std::vector<double> features = featurize_all(all, cal, use_cue);

  struct Slot {
    double current = 0.0;
    double next = 0.0;
    int correct = 0;
  };
  std::vector<Slot> slots(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    std::vector<double> hidden(model.hidden);
    std::array<double, 2 * kActionDim> action{};
    std::array<double, kNumClasses> logits{};
    model.forward(features.data() + i * kFeatureDim, hidden.data(),
                  action.data(), logits.data());
    double lc = 0.0, ln = 0.0;
    for (int k = 0; k < kActionDim; ++k) {
      lc += std::abs(action[k] - data[i].action_now[k]);
      ln += std::abs(action[k + kActionDim] - data[i].action_next[k]);
    }
    slots[i].current = lc / kActionDim;
    slots[i].next = ln / kActionDim;
    const int argmax = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    slots[i].correct = argmax == data[i].xai_class ? 1 : 0;
  });

  EvalMetrics out;
  double correct = 0.0;
  for (const Slot& s : slots) {
    out.current_l1 += s.current;
    out.next_l1 += s.next;
    correct += s.correct;
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  out.current_l1 *= inv_n;
  out.next_l1 *= inv_n;
  out.xai_acc = correct * inv_n;
  return out;
}

void make_corpus(std::uint64_t exp_seed, const ExperimentSizes& sizes,
                 const SamplerConfig& sampler, std::vector<Sample>* train_set,
                 std::vector<Sample>* eval_set) {
  if (sizes.n_train < 0 || sizes.n_eval < 0)
    throw ValidationError("make_corpus: sizes must be nonnegative");
  const std::uint64_t train_tag = mix64(exp_seed, 1);
  const std::uint64_t eval_tag = mix64(exp_seed, 2);
  train_set->assign(static_cast<std::size_t>(sizes.n_train), Sample{});
  eval_set->assign(static_cast<std::size_t>(sizes.n_eval), Sample{});
  parallel_for(train_set->size(), [&](std::size_t i) {
    (*train_set)[i] =
        gen_sample(mix64(train_tag, static_cast<std::uint64_t>(i)), sampler,
                   i % 2 == 1);
  });
  parallel_for(eval_set->size(), [&](std::size_t i) {
    (*eval_set)[i] = gen_sample(mix64(eval_tag, static_cast<std::uint64_t>(i)),
                                sampler, true);
  });
}

Calibration calibrate_from_samples(const std::vector<Sample>& train_set,
                                   const ExperimentConfig& cfg) {
  std::vector<const Sample*> clean;
  for (const Sample& s : train_set)
    if (s.spec.empty()) clean.push_back(&s);
  if (clean.size() < 2)
    throw CalibrationError(
        "calibration requires at least 2 clean training samples");

  std::vector<std::array<double, 3>> feats(clean.size());
  std::vector<double> hf(clean.size()), ent(clean.size());
  parallel_for(clean.size(), [&](std::size_t i) {
    feats[i] = image_hsv_feature(clean[i]->image);
    hf[i] = hf_energy_ratio(clean[i]->image, cfg.metric_params.cutoff_frac);
    ent[i] = local_entropy_std(clean[i]->image, cfg.metric_params.win,
                               cfg.metric_params.bins);
  });

  Calibration cal;
  cal.stats = calibrate_stats(feats, cfg.epsilon);
  cal.stats.n_images = static_cast<int>(clean.size());
  std::vector<double> mahal(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i)
    mahal[i] = mahalanobis(feats[i], cal.stats);
  cal.thresholds = calibrate_thresholds(mahal, hf, ent, cfg.quantile);
  cal.params = cfg.metric_params;
  return cal;
}

ExperimentResult run_experiment(std::uint64_t exp_seed,
                                const ExperimentSizes& sizes,
                                const ExperimentConfig& cfg) {
  std::vector<Sample> train_set, eval_set;
  make_corpus(exp_seed, sizes, cfg.sampler, &train_set, &eval_set);
  const Calibration cal = calibrate_from_samples(train_set, cfg);

  ExperimentResult result;
  result.seed = exp_seed;
  const std::uint64_t model_seed = mix64(exp_seed, 3);
  for (Mode mode : {Mode::kDefault, Mode::kAugmented, Mode::kProposed}) {
    TrainConfig tc;
    tc.lambda_xai = cfg.lambda_xai;
    tc.lr = cfg.lr;
    tc.epochs = cfg.epochs;
    tc.batch = cfg.batch;
    tc.hidden = cfg.hidden;
    tc.seed = model_seed;  // shared across modes: identical initialization
    tc.mode = mode;
    const ToyModel model = train(train_set, tc, cal);

    ModeResult mr;
    mr.mode = mode;
    mr.metrics = evaluate(model, eval_set, cal, mode == Mode::kProposed);
    mr.xai_reported = mode == Mode::kProposed && cfg.lambda_xai > 0.0;
    result.modes.push_back(mr);
  }
  return result;
}

}  // namespace ev3
