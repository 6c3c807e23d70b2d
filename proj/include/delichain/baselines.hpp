#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "delichain/clustering.hpp"
#include "delichain/corpus.hpp"
#include "delichain/features.hpp"
#include "delichain/inference.hpp"

namespace delichain {

enum class BaselineKind { Lexical, Entity, Cosine };

std::string_view baseline_name(BaselineKind k);
BaselineKind baseline_from_name(std::string_view name);  // throws ConfigError

// Thresholds reported for the original corpora. Reproducing them needs the
// original data and labels; they are kept as reference values only.
struct ReportedThreshold {
  BaselineKind kind;
  double delidata;
  double wtd;
};
inline constexpr ReportedThreshold kReportedThresholds[] = {
    {BaselineKind::Lexical, 0.247, 0.263},
    {BaselineKind::Entity, 0.287, 0.173},
    {BaselineKind::Cosine, 0.597, 0.644},
};

struct BaselineSpec {
  BaselineKind kind = BaselineKind::Lexical;
  double threshold = 0.0;
  Schema schema = Schema::Delidata;             // entity only
  const EmbeddingProvider* provider = nullptr;  // cosine only
  EntityOptions entity_options;

  void validate() const;  // throws ConfigError
};

// Similarity of two utterances in [0, 1] (lexical ratio is scaled by 1/100).
double baseline_similarity(const BaselineSpec& spec, std::string_view a, std::string_view b);

struct CalibrationPair {
  std::string probing;
  std::string other;
};

enum class CalibrationPopulation {
  GoldLinked,     // (probing, earlier causal) pairs inside gold clusters
  AllCandidates,  // each gold probing with every preceding utterance
};

std::vector<CalibrationPair> calibration_pairs(const Corpus& dev,
                                               CalibrationPopulation population = CalibrationPopulation::GoldLinked);

// Mean similarity over the calibration pairs. Throws ConfigError when empty.
double calibrate(std::span<const CalibrationPair> pairs, const BaselineSpec& spec);

// Every antecedent mention pair; 1.0 when similarity > threshold, else 0.0.
AdjacencyMatrix baseline_link(const Dialogue& dialogue, const BaselineSpec& spec, std::span<const int> mentions);

// Linking, closure at 0.5 and singleton-preserving partition over a corpus.
PredictedClustering run_baseline(const Corpus& corpus, const BaselineSpec& spec,
                                 MentionMode mentions = MentionMode::GoldInterventions);

struct CalibrationArtifact {
  BaselineKind kind = BaselineKind::Lexical;
  double threshold = 0.0;
  std::string dev_split_hash;
};

std::string corpus_hash(const Corpus& corpus);
std::string calibration_to_json(const CalibrationArtifact& c);
CalibrationArtifact calibration_from_json(const std::string& text);

}  // namespace delichain
