#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "delichain/clustering.hpp"
#include "delichain/corpus.hpp"
#include "delichain/graph.hpp"
#include "delichain/scorer.hpp"

namespace delichain {

enum class MentionMode { GoldInterventions, AllUtterances };
enum class PairMode { Windowed, Naive };

std::vector<int> select_mentions(const Dialogue& dialogue, const GoldClustering& gold, MentionMode mode);

// Antecedent-ordered (i, j) pairs over the mention set, sorted by (j, i).
// Windowed mode keeps j - i <= window (utterance distance).
std::vector<std::pair<int, int>> candidate_pairs(const Dialogue& dialogue, const GoldClustering& gold,
                                                 MentionMode mentions, PairMode mode, int window);

struct PairScore {
  std::string dialogue_id;
  int i = 0;
  int j = 0;
  double link = 0.0;     // l_ij
  double probing = 0.0;  // s_i
  double causal = 0.0;   // s_j

  double intervention() const { return 0.5 * (probing + causal); }
  bool operator==(const PairScore&) const = default;
};

// Scores one antecedent pair of a dialogue.
using PairScorer = std::function<Scores(const Dialogue&, int i, int j)>;

struct ContextConfig {
  int k = kDefaultContextDepth;
  int max_sequence_len = kDefaultMaxSequenceLen;
};

// The trained joint model behind the PairScorer interface. With
// `bidirectional`, each pair is also scored with marker roles swapped and the
// two directions are averaged.
PairScorer joint_scorer(const JointScorerModel& model, const EmbeddingProvider& provider, ContextConfig context = {},
                        bool bidirectional = false);

// The feature of the same pair with the two marked spans swapped.
PairFeature reversed_pair_feature(const PairText& text, const EmbeddingProvider& provider);

std::vector<PairScore> score_candidates(const Dialogue& dialogue, std::span<const std::pair<int, int>> pairs,
                                        const PairScorer& scorer);

// Keeps at most tau = floor(G * chain_size_stat) pairs ranked by mean
// intervention score (descending), ties to lower j then lower i. The result is
// in ranking order. Throws ConfigError when tau <= 0.
std::vector<PairScore> prune_naive(std::span<const PairScore> scored, int intervention_count, double chain_size_stat);

AdjacencyMatrix to_adjacency(const std::string& dialogue_id, std::span<const PairScore> scored);
AdjacencyMatrix score_pairs(const Dialogue& dialogue, std::span<const std::pair<int, int>> pairs,
                            const PairScorer& scorer);

// Links with probability >= threshold, closed transitively (connected
// components). Unlinked mentions stay as singletons. Labels are
// "<dialogue>/m<first index>". `roles` supplies the label of each mention.
PredictedClustering cluster_links(const AdjacencyMatrix& adjacency, std::span<const int> mentions,
                                  const GoldClustering& roles, double threshold = 0.5);

struct InferenceConfig {
  MentionMode mentions = MentionMode::GoldInterventions;
  PairMode mode = PairMode::Windowed;
  int window = kDefaultWindowDelidata;
  double threshold = 0.5;
  double chain_size_stat = 5.0;  // C in tau = G * C (naive mode)

  void validate() const;
};

struct Prediction {
  PredictedClustering clustering;
  std::vector<DeliberationChain> chains;  // singletons dropped
  std::vector<PairScore> scores;          // pairs that reached the linker
};

Prediction predict_chains(const Dialogue& dialogue, const GoldClustering& gold, const PairScorer& scorer,
                          const InferenceConfig& config);

// predict_chains over every dialogue, results concatenated in corpus order.
Prediction predict_corpus(const Corpus& corpus, const PairScorer& scorer, const InferenceConfig& config,
                          unsigned workers = 1);

// Audit: one record per pair {dialogue_id, i, j, l_ij, s_i, s_j}.
void write_pair_scores(std::span<const PairScore> scores, std::ostream& out);

}  // namespace delichain
