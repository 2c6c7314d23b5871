#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "evidence3/evidence.hpp"
#include "evidence3/image.hpp"
#include "evidence3/perturb.hpp"
#include "evidence3/rng.hpp"

namespace ev3 {

inline constexpr int kImageSize = 64;   // square scene side in pixels
inline constexpr int kBlockSize = 8;    // block-mean downsample tile side
inline constexpr int kActionDim = 7;    // per-step action vector length
inline constexpr int kNumClasses = 8;   // transform subsets, bit-encoded
// 8x8 block means per RGB channel plus six cue slots.
inline constexpr int kFeatureDim =
    3 * (kImageSize / kBlockSize) * (kImageSize / kBlockSize) + 6;

// One synthetic manipulation sample: a rendered scene (possibly perturbed),
// the task instruction, ground-truth current/next actions, and the applied
// perturbation used as the explanation label.
struct Sample {
  Image image;
  std::string instruction;
  std::array<double, kActionDim> action_now{};
  std::array<double, kActionDim> action_next{};
  PerturbationSpec spec;  // empty => clean
  int xai_class = 0;      // = explanation_class(spec)
};

// Scene description drawn from a seed: a uniform background plus one filled
// disc (the grasp target). Colors are parameterized by a shared base value
// and a chroma angle/magnitude in a plane chosen orthogonal to the BT.601
// luma weights, so every clean scene has a constant luminance plane and the
// spectral/entropy statistics of clean corpora sit exactly at zero.
struct SceneParams {
  double base_value = 0.54;   // shared luma of background and disc
  double bg_angle_deg = 220.0;
  double bg_chroma = 0.13;
  double disc_angle_deg = 130.0;
  double disc_chroma = 0.17;
  double cx = 32.0;  // disc center, pixel units
  double cy = 32.0;
  double radius = 9.0;
};

// Color at the given luma with a chroma offset in the luma-orthogonal plane;
// channels clamped to [0,1] (never active for the sampled parameter bands).
Rgb iso_color(double luma, double angle_deg, double chroma);

// Fixed draw order so scenes are bit-reproducible from a seed.
SceneParams draw_scene(Rng& rng);

Image render_scene(const SceneParams& p);

// Ground-truth actions: current = normalized target position plus neutral
// joint midpoints with an open gripper; next moves 10% toward the image
// center and closes the gripper.
void scene_actions(const SceneParams& p,
                   std::array<double, kActionDim>& action_now,
                   std::array<double, kActionDim>& action_next);

// Deterministically renders a sample from scene_seed; when perturbed, draws
// a nonempty spec (clean probability forced to zero) and applies it.
Sample gen_sample(std::uint64_t scene_seed, const SamplerConfig& cfg,
                  bool perturbed);

// Feature vector: 8x8 block means of each RGB channel in channel-major
// order (all red blocks row-major, then green, then blue), followed by the
// three metric values and three flag bits when use_cue, else six zeros.
// Throws ValidationError unless the image is kImageSize x kImageSize.
std::vector<double> featurize(const Sample& s, const Calibration& cal,
                              bool use_cue);

// Mean absolute error split into the current (components 0..6) and next
// (components 7..13) halves.
std::pair<double, double> l1_action_loss(const std::array<double, 14>& pred,
                                         const std::array<double, 14>& target);

// Softmax cross-entropy with natural log, stabilized by max-subtraction.
double xai_ce_loss(const std::array<double, kNumClasses>& logits, int cls);

// total = lambda_xai * l_xai + l_act  (exactly linear in each argument).
double total_loss(double l_act, double l_xai, double lambda_xai);

enum class Mode { kDefault, kAugmented, kProposed };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);  // ValidationError on unknown

struct TrainConfig {
  double lambda_xai = 0.5;
  double lr = 0.01;
  int epochs = 4000;
  int batch = 32;
  int hidden = 64;
  std::uint64_t seed = 1;
  Mode mode = Mode::kProposed;
};

// Two-layer perceptron: standardized feature -> tanh hidden -> {action
// head (14), class-logit head (8)}. Parameters live in one flat vector
// [W1 | b1 | Wa | ba | Wx | bx] so gradient checking can walk them
// uniformly. input_offset/input_scale hold a fixed per-dimension affine
// standardization fitted on the training set (identity until train() sets
// it); they are constants of the pipeline, not trained parameters.
struct ToyModel {
  int input_dim = kFeatureDim;
  int hidden = 64;
  std::vector<double> params;
  std::vector<double> input_offset;
  std::vector<double> input_scale;

  ToyModel() = default;
  ToyModel(int input_dim_, int hidden_, std::uint64_t init_seed);

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const {
    return static_cast<std::size_t>(hidden) * input_dim;
  }
  std::size_t wa_offset() const { return b1_offset() + hidden; }
  std::size_t ba_offset() const {
    return wa_offset() + static_cast<std::size_t>(2 * kActionDim) * hidden;
  }
  std::size_t wx_offset() const { return ba_offset() + 2 * kActionDim; }
  std::size_t bx_offset() const {
    return wx_offset() + static_cast<std::size_t>(kNumClasses) * hidden;
  }
  std::size_t param_count() const { return bx_offset() + kNumClasses; }

  // Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)) in a
  // fixed draw order (W1, Wa, Wx row-major); biases zero. Every head is
  // initialized regardless of training mode so runs with a shared seed
  // start from identical parameters.
  void init(std::uint64_t seed);

  // Applies the stored standardization; out must hold input_dim slots.
  void normalize(const double* feature, double* out) const;

  // Forward pass over an already-standardized feature vector.
  // hidden_out, action_out, logits_out must hold hidden, 14, and 8 slots.
  void forward_core(const double* norm_feature, double* hidden_out,
                    double* action_out, double* logits_out) const;

  // Convenience: normalize + forward_core on a raw feature vector.
  void forward(const double* feature, double* hidden_out, double* action_out,
               double* logits_out) const;
};

// Fixed-size training batch in contiguous row-major buffers.
struct Batch {
  std::size_t size = 0;
  std::vector<double> features;  // size * input_dim
  std::vector<double> targets;   // size * 14, current then next
  std::vector<int> classes;      // size
};

// Mean total_loss over the batch; when grad is non-null it receives the
// analytic gradient (same layout/length as model.params). A zero
// lambda_xai skips the class head entirely, so its parameters receive
// exactly zero gradient.
double loss_and_grad(const ToyModel& model, const Batch& batch,
                     double lambda_xai, std::vector<double>* grad);

// Mini-batch gradient descent on total_loss. Mode semantics: kDefault
// trains on clean samples only with no cue features and lambda 0;
// kAugmented trains on everything, still cue-free with lambda 0;
// kProposed trains on everything with cue features and cfg.lambda_xai.
// Deterministic given (data order, cfg): parameter init and the per-epoch
// shuffles derive from cfg.seed alone. Throws TrainingError when the
// selected subset is empty.
ToyModel train(const std::vector<Sample>& data, const TrainConfig& cfg,
               const Calibration& cal);

struct EvalMetrics {
  double current_l1 = 0.0;
  double next_l1 = 0.0;
  double xai_acc = 0.0;  // argmax-logit class accuracy
};

// Mean per-sample metrics over data; order-invariant. Throws
// TrainingError on empty data.
EvalMetrics evaluate(const ToyModel& model, const std::vector<Sample>& data,
                     const Calibration& cal, bool use_cue);

struct ExperimentSizes {
  int n_train = 2000;
  int n_eval = 500;
};

struct ExperimentConfig {
  SamplerConfig sampler{};
  MetricParams metric_params{};
  double quantile = 0.99;
  double epsilon = 1e-6;
  double lambda_xai = 0.5;
  double lr = 0.01;
  int epochs = 4000;
  int batch = 32;
  int hidden = 64;
};

struct ModeResult {
  Mode mode = Mode::kDefault;
  EvalMetrics metrics;
  bool xai_reported = false;  // true only when the class head was trained
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::vector<ModeResult> modes;  // default, augmented, proposed
};

// Deterministic corpus synthesis: train sample i uses scene seed
// mix64(mix64(exp_seed, 1), i) and alternates clean/perturbed (even i
// clean); eval sample i uses mix64(mix64(exp_seed, 2), i) and is always
// perturbed.
void make_corpus(std::uint64_t exp_seed, const ExperimentSizes& sizes,
                 const SamplerConfig& sampler, std::vector<Sample>* train_set,
                 std::vector<Sample>* eval_set);

// Calibrates on the clean train split (stats from mean-HSV features,
// thresholds from the metric quantiles).
Calibration calibrate_from_samples(const std::vector<Sample>& train_set,
                                   const ExperimentConfig& cfg);

// Full single-seed comparison: corpus synthesis, calibration, one training
// run per mode from a shared parameter seed, evaluation on the perturbed
// eval set.
ExperimentResult run_experiment(std::uint64_t exp_seed,
                                const ExperimentSizes& sizes,
                                const ExperimentConfig& cfg);

}  // namespace ev3
