#pragma once

#include <cstdint>
#include <vector>

#include "delichain/corpus.hpp"
#include "delichain/features.hpp"
#include "delichain/inference.hpp"
#include "delichain/pairs.hpp"
#include "delichain/scorer.hpp"

namespace delichain {

// Labels for a pair scored as (antecedent i, consequent j).
Labels pair_labels(const LabeledPair& p);

// Windowed training pairs of every dialogue, featurized. With `bidirectional`
// each example also carries the swapped-marker feature and its labels.
std::vector<TrainExample> build_training_set(const Corpus& corpus, const EmbeddingProvider& provider, int window,
                                             ContextConfig context = {}, bool bidirectional = false,
                                             unsigned workers = 1);

// Characteristic chain size used for naive pruning: mean gold chain size for
// delidata-like corpora, max for wtd-like ones. Throws ValidationError when
// the corpus has no chains.
double chain_size_stat(const Corpus& corpus);

struct GradCheckOptions {
  int draws = 50;
  double step = 1e-5;
  std::size_t dimension = 12;
  std::size_t hidden = 6;
  std::size_t batch = 4;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct GradCheckDraw {
  std::uint64_t seed = 0;
  bool bidirectional = false;
  GradCheckReport report;
};

// Each draw synthesizes a small corpus, featurizes a random batch of its
// windowed pairs (odd draws bidirectional), initializes a model with a random
// input scale and compares backward() with central differences.
std::vector<GradCheckDraw> run_grad_checks(const GradCheckOptions& options);

}  // namespace delichain
