#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delichain/features.hpp"

namespace delichain {

// Fully connected layer. Weights are stored input-major (w[k * out + o]) so a
// zero input component can be skipped in both passes; hashed bag-of-words
// features are mostly zeros.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

// Feed-forward scorer: rectifier hidden layers, one raw logit out.
class Ffnn {
 public:
  Ffnn() = default;
  // sizes = {input, hidden..., 1}. Parameters drawn uniformly from
  // [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Ffnn(std::vector<std::size_t> sizes, Rng& rng);
  static Ffnn zeros(std::vector<std::size_t> sizes);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  // Forward pass keeping what backward needs.
  struct Trace {
    std::vector<std::vector<double>> inputs;  // input to each layer (post-activation)
    double logit = 0.0;
  };
  double logit(std::span<const double> x) const;
  double logit(std::span<const double> x, Trace& trace) const;

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logit).
  void accumulate_gradient(const Trace& trace, double dlogit, Ffnn& grad) const;

  bool operator==(const Ffnn&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
};

struct LossWeights {
  double link = 1.0;
  double probing = 0.01;
  double causal = 0.01;

  bool operator==(const LossWeights&) const = default;
};

inline constexpr std::size_t kDefaultHiddenWidth = 128;

// Three heads over the pair feature: link over all four segments, probing
// over v_p, causal over v_c.
struct JointScorerModel {
  std::size_t dimension = 0;
  std::vector<std::size_t> hidden;
  Ffnn link;
  Ffnn probing;
  Ffnn causal;
  LossWeights alphas;
  std::uint64_t seed = 0;
  // Per-component multiplier applied to the pair feature before the heads;
  // empty means identity. Fitted on the training set (see fit_input_scale).
  std::vector<double> input_scale;

  JointScorerModel() = default;
  JointScorerModel(std::size_t dimension, std::vector<std::size_t> hidden, LossWeights alphas, std::uint64_t seed);

  std::size_t parameter_count() const;
  bool operator==(const JointScorerModel&) const = default;
};

struct Scores {
  double link = 0.5;
  double probing = 0.5;  // s_i: consequent is a probing intervention
  double causal = 0.5;   // s_j: antecedent is a causal intervention
};

struct Labels {
  double link = 0.0;
  double probing = 0.0;
  double causal = 0.0;
};

// Throws ShapeError when the feature does not match the model.
Scores forward(const JointScorerModel& model, const PairFeature& feature);
Scores forward(const JointScorerModel& model, std::span<const double> concatenated);

// Averaged probabilities of the pair scored in both marker orders.
Scores forward_bidirectional(const JointScorerModel& model, const PairFeature& feature_ij,
                             const PairFeature& feature_ji);

inline constexpr double kProbabilityClamp = 1e-12;

// Binary cross-entropy with the probability clamped to [1e-12, 1 - 1e-12].
double bce(double p, double y);

// alpha_p * sum BCE(s_i) + alpha_c * sum BCE(s_j) + alpha_l * sum BCE(l_ij).
double joint_loss(std::span<const Scores> outputs, std::span<const Labels> labels, const LossWeights& alphas);

struct LossTerms {
  double link = 0.0;
  double probing = 0.0;
  double causal = 0.0;
};
LossTerms loss_terms(std::span<const Scores> outputs, std::span<const Labels> labels);

// One training instance. With `reverse` present the instance contributes the
// mean of the two directional losses.
struct TrainExample {
  PairFeature feature;
  Labels labels;
  std::optional<PairFeature> reverse;
  Labels reverse_labels;
};

struct Gradients {
  Ffnn link;
  Ffnn probing;
  Ffnn causal;
};

Gradients zero_gradients(const JointScorerModel& model);

// Joint loss of a batch, computed through forward().
double batch_loss(const JointScorerModel& model, std::span<const TrainExample> batch);

// Analytic gradient of batch_loss with respect to every parameter.
Gradients backward(const JointScorerModel& model, std::span<const TrainExample> batch);

struct TrainConfig {
  int batch_size = 24;
  double lr_link = 1e-4;
  double lr_intervention = 1e-5;
  int epochs = 16;
  bool bidirectional = false;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool scale_inputs = true;
  double input_scale_floor = 1e-2;

  void validate() const;  // throws ConfigError
};

// input_scale[k] = 1 / max(rms_k, floor) over all training features (both
// directions when present). Sparse inputs stay sparse.
void fit_input_scale(JointScorerModel& model, std::span<const TrainExample> examples, double floor);

struct TrainResult {
  JointScorerModel model;
  std::vector<double> history;  // mean loss per example, per epoch
};

// Adam with lr_link on the link head and lr_intervention on the other two.
// Examples are pooled and shuffled each epoch with the config seed. With
// scale_inputs the input scale is fitted first. Throws NumericError on a
// non-finite loss.
TrainResult train(JointScorerModel model, std::span<const TrainExample> examples, const TrainConfig& config);

using GradientFn = std::function<Gradients(const JointScorerModel&, std::span<const TrainExample>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Parameters whose perturbation flips a rectifier; central differences are
  // invalid across the kink so they are left out.
  std::size_t skipped_kinks = 0;
  std::string worst_parameter;
};

// Compares `gradient` (backward by default) against central differences.
// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const JointScorerModel& model, std::span<const TrainExample> batch, double step,
                           const GradientFn& gradient = backward, double floor = 1e-6);

struct Checkpoint {
  JointScorerModel model;
  TrainConfig config;
  std::vector<double> history;
};

std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);  // throws ShapeError / ParseError
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace delichain
