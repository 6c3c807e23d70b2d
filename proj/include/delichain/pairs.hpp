#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delichain/corpus.hpp"

namespace delichain {

// Window defaults tuned on the dev splits of the two source corpora.
inline constexpr int kDefaultWindowDelidata = 18;
inline constexpr int kDefaultWindowWtd = 9;
inline constexpr int kDefaultContextDepth = 10;
inline constexpr int kDefaultMaxSequenceLen = 512;

inline int default_window(Schema s) { return s == Schema::Delidata ? kDefaultWindowDelidata : kDefaultWindowWtd; }

struct LabeledPair {
  std::string dialogue_id;
  int i = 0;  // antecedent (candidate causal)
  int j = 0;  // consequent (candidate probing)
  int y = 0;  // 1 iff both share a gold cluster
  Role role_i = Role::Neither;
  Role role_j = Role::Neither;

  bool operator==(const LabeledPair&) const = default;
};

// Every (i, j) with j - W <= i < j. Utterances labeled Neither take part as
// negatives.
std::vector<LabeledPair> generate_training_pairs(const Dialogue& dialogue, const GoldClustering& gold, int window);

class TruncationError : public Error {
 public:
  using Error::Error;
};

// Rendered pair input. Each line is "speaker : text"; the antecedent and
// consequent lines wrap their text in <m> ... </m>. Spans are byte offsets of
// the text between the markers.
struct PairText {
  std::string rendered;
  std::pair<std::size_t, std::size_t> antecedent_span;
  std::pair<std::size_t, std::size_t> consequent_span;
  std::size_t token_count = 0;

  std::string_view antecedent_text() const;
  std::string_view consequent_text() const;
};

// Renders utterance i, the k utterances preceding j, and j. When over budget,
// context tokens are dropped oldest first; the marked lines are never cut.
PairText assemble_pair_text(const Dialogue& dialogue, int i, int j, int k = kDefaultContextDepth,
                            int max_sequence_len = kDefaultMaxSequenceLen);

struct PairStats {
  long positives = 0;
  long negatives = 0;
  double ratio = 0.0;  // positives / (positives + negatives)
};

PairStats pair_statistics(std::span<const LabeledPair> pairs);

struct WindowSweepPoint {
  int window = 0;
  PairStats stats;
  double positive_coverage = 0.0;  // share of all gold links inside the window
};

struct WindowSweep {
  std::vector<WindowSweepPoint> points;
  int chosen = 0;
};

// Picks the widest candidate window whose positive share stays >= min_ratio,
// falling back to the candidate with the highest share.
WindowSweep sweep_window(const Corpus& dev, std::span<const int> candidates, double min_ratio = 0.1);

// Audit dump: one JSON record per pair {dialogue_id, i, j, y, role_i, role_j}.
void write_pairs(std::span<const LabeledPair> pairs, std::ostream& out);

}  // namespace delichain
