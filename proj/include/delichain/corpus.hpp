#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delichain/common.hpp"

namespace delichain {

struct Utterance {
  std::string id;  // "<dialogue_id>#<index>"
  std::string speaker;
  std::string text;
  int index = 0;

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  Schema task_schema = Schema::Delidata;

  std::size_t size() const { return utterances.size(); }
  const Utterance& at(int index) const;  // throws ValidationError when out of range
  bool operator==(const Dialogue&) const = default;
};

std::string utterance_id(std::string_view dialogue_id, int index);

// Gold intervention roles and chain membership. Roles default to Neither for
// any utterance absent from `labels`.
struct GoldClustering {
  std::map<MentionRef, std::string> assignments;
  std::map<MentionRef, Role> labels;

  Role role(const MentionRef& m) const;
  std::optional<std::string> cluster_of(const MentionRef& m) const;

  // cluster label -> members sorted by (dialogue, index)
  std::map<std::string, std::vector<MentionRef>> clusters() const;

  // Gold probing and causal utterances of one dialogue, in temporal order.
  std::vector<int> interventions(const std::string& dialogue_id) const;

  GoldClustering restricted_to(const std::string& dialogue_id) const;

  bool operator==(const GoldClustering&) const = default;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  GoldClustering gold;
  std::string split_name = "train";

  const Dialogue* find(const std::string& dialogue_id) const;
  bool operator==(const Corpus&) const = default;
};

// Throws ValidationError describing the first violated invariant.
void validate_corpus(const Corpus& corpus);

// Reads a JSON-lines corpus (header record + one record per utterance) or a
// tab-separated file with a column header. `fallback_schema` applies when the
// file carries no schema of its own.
Corpus read_corpus(std::istream& in, Schema fallback_schema = Schema::Delidata);
Corpus load_corpus(const std::filesystem::path& path, Schema fallback_schema = Schema::Delidata);

void write_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SynthConfig {
  int n_dialogues = 100;
  double mean_dialogue_len = 33.0;
  double mean_chain_len = 5.0;
  std::uint64_t vocab_seed = 1;
  Schema schema = Schema::Delidata;
  // Fraction of utterances that belong to some chain.
  double intervention_density = 0.3;
  // Pool of topic words; each chain owns one, and topics recur across
  // dialogues the way card symbols or block colours do.
  int content_vocab_size = 20;
  // Chance that a chain member also mentions the topic of another chain.
  double cross_chain_leak = 0.02;
};

// Deterministic for a fixed (config, seed). Every chain member carries the
// chain's topic word. Distractors: shared cue phrases and fillers, task
// entities, topic mentions in non-interventions, and rare cross-chain leaks.
Corpus synthesize_corpus(const SynthConfig& config, std::uint64_t seed,
                         std::string split_name = "train");

struct CorpusStats {
  int dialogues = 0;
  int utterances = 0;
  int probing = 0;
  int causal = 0;
  int clusters = 0;
  int min_chain = 0;
  int max_chain = 0;
  double mean_chain = 0.0;
  double mean_dialogue_len = 0.0;
};

CorpusStats corpus_statistics(const Corpus& corpus);

}  // namespace delichain
