#include "delichain/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "delichain/io.hpp"

namespace delichain {

// ---------------------------------------------------------------------------
// Ffnn

Ffnn::Ffnn(std::vector<std::size_t> sizes, Rng& rng) : Ffnn(zeros(std::move(sizes))) {
  for (auto& layer : layers_) {
    const double r = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weights) w = rng.uniform(-r, r);
    for (double& b : layer.bias) b = rng.uniform(-r, r);
  }
}

Ffnn Ffnn::zeros(std::vector<std::size_t> sizes) {
  if (sizes.size() < 2 || sizes.back() != 1) throw ShapeError("FFNN sizes must be {input, hidden..., 1}");
  for (auto s : sizes)
    if (s == 0) throw ShapeError("FFNN layer sizes must be positive");
  Ffnn f;
  f.sizes_ = std::move(sizes);
  for (std::size_t t = 0; t + 1 < f.sizes_.size(); ++t) {
    DenseLayer layer;
    layer.in = f.sizes_[t];
    layer.out = f.sizes_[t + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    f.layers_.push_back(std::move(layer));
  }
  return f;
}

std::size_t Ffnn::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

namespace {

// z = b + x W, skipping zero inputs.
void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& z) {
  z.assign(layer.bias.begin(), layer.bias.end());
  const std::size_t out = layer.out;
  for (std::size_t k = 0; k < layer.in; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* row = layer.weights.data() + k * out;
    for (std::size_t o = 0; o < out; ++o) z[o] += row[o] * xk;
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double Ffnn::logit(std::span<const double> x) const {
  Trace unused;
  return logit(x, unused);
}

double Ffnn::logit(std::span<const double> x, Trace& trace) const {
  if (x.size() != input_size())
    throw ShapeError("FFNN expects input of size " + std::to_string(input_size()) + ", got " + std::to_string(x.size()));
  trace.inputs.resize(layers_.size());
  trace.inputs[0].assign(x.begin(), x.end());
  std::vector<double> z;
  for (std::size_t t = 0; t < layers_.size(); ++t) {
    affine(layers_[t], trace.inputs[t], z);
    if (t + 1 < layers_.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      trace.inputs[t + 1] = z;
    }
  }
  trace.logit = z[0];
  return trace.logit;
}

void Ffnn::accumulate_gradient(const Trace& trace, double dlogit, Ffnn& grad) const {
  std::vector<double> delta{dlogit};
  std::vector<double> below;
  for (std::size_t t = layers_.size(); t-- > 0;) {
    const auto& layer = layers_[t];
    auto& g = grad.layers_[t];
    const auto& x = trace.inputs[t];
    const std::size_t out = layer.out;
    for (std::size_t o = 0; o < out; ++o) g.bias[o] += delta[o];
    if (t > 0) below.assign(layer.in, 0.0);
    for (std::size_t k = 0; k < layer.in; ++k) {
      const double xk = x[k];
      // x is a rectifier output for t > 0, so a zero input also has zero
      // gradient below it.
      if (xk == 0.0) continue;
      double* grow = g.weights.data() + k * out;
      for (std::size_t o = 0; o < out; ++o) grow[o] += xk * delta[o];
      if (t > 0) {
        const double* wrow = layer.weights.data() + k * out;
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += wrow[o] * delta[o];
        below[k] = acc;
      }
    }
    if (t > 0) delta.swap(below);
  }
}

// ---------------------------------------------------------------------------
// Joint model

JointScorerModel::JointScorerModel(std::size_t dim, std::vector<std::size_t> hidden_sizes, LossWeights a,
                                   std::uint64_t s)
    : dimension(dim), hidden(std::move(hidden_sizes)), alphas(a), seed(s) {
  if (dimension == 0) throw ShapeError("model dimension must be positive");
  if (alphas.link <= 0 || alphas.probing <= 0 || alphas.causal <= 0)
    throw ConfigError("loss weights must be positive");
  auto sizes = [&](std::size_t in) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
  };
  Rng rng(seed);
  link = Ffnn(sizes(4 * dimension), rng);
  probing = Ffnn(sizes(dimension), rng);
  causal = Ffnn(sizes(dimension), rng);
}

std::size_t JointScorerModel::parameter_count() const {
  return link.parameter_count() + probing.parameter_count() + causal.parameter_count();
}

namespace {

struct HeadTraces {
  Ffnn::Trace link, probing, causal;
};

void check_feature(const JointScorerModel& model, std::span<const double> x) {
  if (x.size() != 4 * model.dimension)
    throw ShapeError("pair feature has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(4 * model.dimension));
}

Scores run_heads(const JointScorerModel& model, std::span<const double> raw, HeadTraces& tr) {
  check_feature(model, raw);
  const std::size_t d = model.dimension;
  thread_local std::vector<double> scaled;
  std::span<const double> x = raw;
  if (!model.input_scale.empty()) {
    scaled.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) scaled[k] = raw[k] * model.input_scale[k];
    x = scaled;
  }
  return Scores{sigmoid(model.link.logit(x, tr.link)), sigmoid(model.probing.logit(x.subspan(d, d), tr.probing)),
                sigmoid(model.causal.logit(x.subspan(2 * d, d), tr.causal))};
}

double example_loss(const Scores& s, const Labels& y, const LossWeights& a) {
  return a.probing * bce(s.probing, y.probing) + a.causal * bce(s.causal, y.causal) + a.link * bce(s.link, y.link);
}

// d BCE(clamp(sigmoid(z)), y) / dz; zero where the clamp is active.
double dloss_dlogit(double p, double y) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return p - y;
}

double accumulate_direction(const JointScorerModel& model, std::span<const double> x, const Labels& y, double scale,
                            Gradients& g) {
  HeadTraces tr;
  const Scores s = run_heads(model, x, tr);
  const auto& a = model.alphas;
  model.link.accumulate_gradient(tr.link, scale * a.link * dloss_dlogit(s.link, y.link), g.link);
  model.probing.accumulate_gradient(tr.probing, scale * a.probing * dloss_dlogit(s.probing, y.probing), g.probing);
  model.causal.accumulate_gradient(tr.causal, scale * a.causal * dloss_dlogit(s.causal, y.causal), g.causal);
  return scale * example_loss(s, y, a);
}

double accumulate_example(const JointScorerModel& model, const TrainExample& ex, Gradients& g) {
  if (!ex.reverse) return accumulate_direction(model, ex.feature.concatenated, ex.labels, 1.0, g);
  return accumulate_direction(model, ex.feature.concatenated, ex.labels, 0.5, g) +
         accumulate_direction(model, ex.reverse->concatenated, ex.reverse_labels, 0.5, g);
}

double forward_example_loss(const JointScorerModel& model, const TrainExample& ex) {
  const double l = example_loss(forward(model, ex.feature), ex.labels, model.alphas);
  if (!ex.reverse) return l;
  return 0.5 * (l + example_loss(forward(model, *ex.reverse), ex.reverse_labels, model.alphas));
}

}  // namespace

Scores forward(const JointScorerModel& model, std::span<const double> concatenated) {
  HeadTraces tr;
  return run_heads(model, concatenated, tr);
}

Scores forward(const JointScorerModel& model, const PairFeature& feature) {
  if (feature.dimension != model.dimension)
    throw ShapeError("feature dimension " + std::to_string(feature.dimension) + " does not match model dimension " +
                     std::to_string(model.dimension));
  return forward(model, std::span<const double>(feature.concatenated));
}

Scores forward_bidirectional(const JointScorerModel& model, const PairFeature& feature_ij,
                             const PairFeature& feature_ji) {
  const Scores a = forward(model, feature_ij);
  const Scores b = forward(model, feature_ji);
  return Scores{0.5 * (a.link + b.link), 0.5 * (a.probing + b.probing), 0.5 * (a.causal + b.causal)};
}

double bce(double p, double y) {
  const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

LossTerms loss_terms(std::span<const Scores> outputs, std::span<const Labels> labels) {
  if (outputs.size() != labels.size()) throw ShapeError("outputs and labels differ in length");
  LossTerms t;
  for (std::size_t n = 0; n < outputs.size(); ++n) {
    t.link += bce(outputs[n].link, labels[n].link);
    t.probing += bce(outputs[n].probing, labels[n].probing);
    t.causal += bce(outputs[n].causal, labels[n].causal);
  }
  return t;
}

double joint_loss(std::span<const Scores> outputs, std::span<const Labels> labels, const LossWeights& alphas) {
  if (outputs.empty()) throw ConfigError("joint_loss needs a non-empty batch");
  const auto t = loss_terms(outputs, labels);
  return alphas.probing * t.probing + alphas.causal * t.causal + alphas.link * t.link;
}

Gradients zero_gradients(const JointScorerModel& model) {
  return Gradients{Ffnn::zeros(model.link.sizes()), Ffnn::zeros(model.probing.sizes()),
                   Ffnn::zeros(model.causal.sizes())};
}

double batch_loss(const JointScorerModel& model, std::span<const TrainExample> batch) {
  double loss = 0.0;
  for (const auto& ex : batch) loss += forward_example_loss(model, ex);
  return loss;
}

Gradients backward(const JointScorerModel& model, std::span<const TrainExample> batch) {
  Gradients g = zero_gradients(model);
  for (const auto& ex : batch) accumulate_example(model, ex, g);
  return g;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_link > 0) || !(lr_intervention > 0)) throw ConfigError("learning rates must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0))
    throw ConfigError("invalid Adam hyperparameters");
  if (scale_inputs && !(input_scale_floor > 0)) throw ConfigError("input_scale_floor must be positive");
}

namespace {

class Adam {
 public:
  Adam(const Ffnn& shape, double lr, const TrainConfig& cfg)
      : m_(Ffnn::zeros(shape.sizes())), v_(Ffnn::zeros(shape.sizes())), lr_(lr), cfg_(cfg) {}

  void step(Ffnn& params, const Ffnn& grad, long t) {
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
    for (std::size_t l = 0; l < params.layers().size(); ++l) {
      update(params.layers()[l].weights, grad.layers()[l].weights, m_.layers()[l].weights, v_.layers()[l].weights, c1, c2);
      update(params.layers()[l].bias, grad.layers()[l].bias, m_.layers()[l].bias, v_.layers()[l].bias, c1, c2);
    }
  }

 private:
  void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
              double c1, double c2) const {
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.epsilon);
    }
  }

  Ffnn m_, v_;
  double lr_;
  const TrainConfig& cfg_;
};

void clear(Ffnn& f) {
  for (auto& l : f.layers()) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

}  // namespace

void fit_input_scale(JointScorerModel& model, std::span<const TrainExample> examples, double floor) {
  if (!(floor > 0.0)) throw ConfigError("input scale floor must be positive");
  std::vector<double> sq(4 * model.dimension, 0.0);
  std::size_t n = 0;
  auto add = [&](const PairFeature& f) {
    check_feature(model, f.concatenated);
    for (std::size_t k = 0; k < sq.size(); ++k) sq[k] += f.concatenated[k] * f.concatenated[k];
    ++n;
  };
  for (const auto& ex : examples) {
    add(ex.feature);
    if (ex.reverse) add(*ex.reverse);
  }
  if (n == 0) throw ConfigError("input scale needs at least one example");
  model.input_scale.assign(sq.size(), 0.0);
  for (std::size_t k = 0; k < sq.size(); ++k)
    model.input_scale[k] = 1.0 / std::max(std::sqrt(sq[k] / static_cast<double>(n)), floor);
}

TrainResult train(JointScorerModel model, std::span<const TrainExample> examples, const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw ConfigError("training needs at least one example");
  for (const auto& ex : examples) {
    check_feature(model, ex.feature.concatenated);
    if (ex.reverse) check_feature(model, ex.reverse->concatenated);
  }
  if (config.scale_inputs) fit_input_scale(model, examples, config.input_scale_floor);

  TrainResult result{std::move(model), {}};
  auto& m = result.model;
  Adam adam_link(m.link, config.lr_link, config);
  Adam adam_probing(m.probing, config.lr_intervention, config);
  Adam adam_causal(m.causal, config.lr_intervention, config);
  Gradients g = zero_gradients(m);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  long t = 0;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      clear(g.link);
      clear(g.probing);
      clear(g.causal);
      double loss = 0.0;
      const std::size_t end = std::min(order.size(), start + bs);
      for (std::size_t n = start; n < end; ++n) loss += accumulate_example(m, examples[order[n]], g);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << start / bs << " (examples " << start << ".."
            << end - 1 << ")";
        throw NumericError(msg.str());
      }
      epoch_loss += loss;
      ++t;
      adam_link.step(m.link, g.link, t);
      adam_probing.step(m.probing, g.probing, t);
      adam_causal.step(m.causal, g.causal, t);
    }
    result.history.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification

namespace {

void append_signature(const Ffnn::Trace& tr, std::vector<char>& sig) {
  for (std::size_t t = 1; t < tr.inputs.size(); ++t)
    for (double a : tr.inputs[t]) sig.push_back(a > 0.0 ? 1 : 0);
}

std::vector<char> rectifier_signature(const JointScorerModel& model, std::span<const TrainExample> batch) {
  std::vector<char> sig;
  auto visit = [&](const PairFeature& f) {
    HeadTraces tr;
    run_heads(model, f.concatenated, tr);
    append_signature(tr.link, sig);
    append_signature(tr.probing, sig);
    append_signature(tr.causal, sig);
  };
  for (const auto& ex : batch) {
    visit(ex.feature);
    if (ex.reverse) visit(*ex.reverse);
  }
  return sig;
}

}  // namespace

GradCheckReport grad_check(const JointScorerModel& model, std::span<const TrainExample> batch, double step,
                           const GradientFn& gradient, double floor) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw ConfigError("grad_check step must be in [1e-7, 1e-3]");
  const Gradients analytic = gradient(model, batch);
  const auto base_sig = rectifier_signature(model, batch);

  JointScorerModel work = model;
  GradCheckReport report;
  const std::pair<const char*, std::pair<Ffnn*, const Ffnn*>> heads[] = {
      {"link", {&work.link, &analytic.link}},
      {"probing", {&work.probing, &analytic.probing}},
      {"causal", {&work.causal, &analytic.causal}}};

  auto probe = [&](double& param, double a, const std::string& name) {
    const double saved = param;
    param = saved + step;
    const double plus = batch_loss(work, batch);
    const bool kink_plus = rectifier_signature(work, batch) != base_sig;
    param = saved - step;
    const double minus = batch_loss(work, batch);
    const bool kink_minus = rectifier_signature(work, batch) != base_sig;
    param = saved;
    if (kink_plus || kink_minus) {
      ++report.skipped_kinks;
      return;
    }
    const double numeric = (plus - minus) / (2.0 * step);
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++report.checked;
    if (rel > report.max_relative_error || report.worst_parameter.empty()) {
      report.max_relative_error = rel;
      report.worst_parameter = name;
    }
  };

  for (const auto& [head, ptrs] : heads) {
    auto& params = *ptrs.first;
    const auto& grads = *ptrs.second;
    for (std::size_t l = 0; l < params.layers().size(); ++l) {
      auto& layer = params.layers()[l];
      const auto& gl = grads.layers()[l];
      const std::string prefix = std::string(head) + ".layer" + std::to_string(l);
      for (std::size_t k = 0; k < layer.weights.size(); ++k)
        probe(layer.weights[k], gl.weights[k], prefix + ".w[" + std::to_string(k) + "]");
      for (std::size_t k = 0; k < layer.bias.size(); ++k)
        probe(layer.bias[k], gl.bias[k], prefix + ".b[" + std::to_string(k) + "]");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using ojson = nlohmann::ordered_json;

ojson head_to_json(const Ffnn& f) {
  ojson j;
  j["sizes"] = f.sizes();
  auto layers = ojson::array();
  for (const auto& l : f.layers()) {
    ojson lj;
    lj["weights"] = l.weights;
    lj["bias"] = l.bias;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

Ffnn head_from_json(const nlohmann::json& j, const std::vector<std::size_t>& expected, const char* name) {
  const auto sizes = j.at("sizes").get<std::vector<std::size_t>>();
  if (sizes != expected) throw ShapeError(std::string("checkpoint head '") + name + "' has unexpected layer sizes");
  Ffnn f = Ffnn::zeros(sizes);
  const auto& layers = j.at("layers");
  if (layers.size() != f.layers().size()) throw ShapeError(std::string("checkpoint head '") + name + "' layer count");
  for (std::size_t l = 0; l < f.layers().size(); ++l) {
    auto w = layers[l].at("weights").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    auto& dst = f.layers()[l];
    if (w.size() != dst.weights.size() || b.size() != dst.bias.size())
      throw ShapeError(std::string("checkpoint head '") + name + "' layer " + std::to_string(l) + " shape mismatch");
    dst.weights = std::move(w);
    dst.bias = std::move(b);
  }
  return f;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
  const auto& m = c.model;
  ojson j;
  j["format"] = "delichain-scorer";
  j["version"] = 1;
  j["dimension"] = m.dimension;
  j["hidden"] = m.hidden;
  j["alphas"] = {{"link", m.alphas.link}, {"probing", m.alphas.probing}, {"causal", m.alphas.causal}};
  j["seed"] = m.seed;
  j["input_scale"] = m.input_scale;
  const auto& t = c.config;
  j["train_config"] = {{"batch_size", t.batch_size},   {"lr_link", t.lr_link},   {"lr_intervention", t.lr_intervention},
                       {"epochs", t.epochs},           {"bidirectional", t.bidirectional}, {"seed", t.seed},
                       {"beta1", t.beta1},             {"beta2", t.beta2},       {"epsilon", t.epsilon},
                       {"scale_inputs", t.scale_inputs}, {"input_scale_floor", t.input_scale_floor}};
  j["history"] = c.history;
  j["heads"] = {{"link", head_to_json(m.link)}, {"probing", head_to_json(m.probing)}, {"causal", head_to_json(m.causal)}};
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 1);
  }
  try {
    if (j.at("format") != "delichain-scorer" || j.at("version") != 1)
      throw ShapeError("unsupported checkpoint format or version");
    Checkpoint c;
    auto& m = c.model;
    m.dimension = j.at("dimension").get<std::size_t>();
    m.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    const auto& a = j.at("alphas");
    m.alphas = LossWeights{a.at("link").get<double>(), a.at("probing").get<double>(), a.at("causal").get<double>()};
    m.seed = j.at("seed").get<std::uint64_t>();
    m.input_scale = j.at("input_scale").get<std::vector<double>>();
    if (!m.input_scale.empty() && m.input_scale.size() != 4 * m.dimension)
      throw ShapeError("checkpoint input scale has length " + std::to_string(m.input_scale.size()));
    auto sizes = [&](std::size_t in) {
      std::vector<std::size_t> s{in};
      s.insert(s.end(), m.hidden.begin(), m.hidden.end());
      s.push_back(1);
      return s;
    };
    const auto& heads = j.at("heads");
    m.link = head_from_json(heads.at("link"), sizes(4 * m.dimension), "link");
    m.probing = head_from_json(heads.at("probing"), sizes(m.dimension), "probing");
    m.causal = head_from_json(heads.at("causal"), sizes(m.dimension), "causal");
    const auto& t = j.at("train_config");
    c.config.batch_size = t.at("batch_size").get<int>();
    c.config.lr_link = t.at("lr_link").get<double>();
    c.config.lr_intervention = t.at("lr_intervention").get<double>();
    c.config.epochs = t.at("epochs").get<int>();
    c.config.bidirectional = t.at("bidirectional").get<bool>();
    c.config.seed = t.at("seed").get<std::uint64_t>();
    c.config.beta1 = t.at("beta1").get<double>();
    c.config.beta2 = t.at("beta2").get<double>();
    c.config.epsilon = t.at("epsilon").get<double>();
    c.config.scale_inputs = t.at("scale_inputs").get<bool>();
    c.config.input_scale_floor = t.at("input_scale_floor").get<double>();
    c.history = j.at("history").get<std::vector<double>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 1);
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_string(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_string(read_file(path)); }

}  // namespace delichain
