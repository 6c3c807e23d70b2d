#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "delichain/common.hpp"

namespace delichain {

// A partition over a mention set produced by the linker. Unlike gold data it
// may contain singletons and clusters with a single role.
struct PredictedClustering {
  std::map<MentionRef, std::string> assignments;
  std::map<MentionRef, Role> labels;

  std::map<std::string, std::vector<MentionRef>> clusters() const;
  bool operator==(const PredictedClustering&) const = default;
};

// Link probabilities for antecedent-ordered pairs (i < j) of one dialogue.
struct AdjacencyMatrix {
  std::string dialogue_id;
  std::map<std::pair<int, int>, double> links;

  bool operator==(const AdjacencyMatrix&) const = default;
};

// A partition as a list of clusters; the form metrics work on.
using Partition = std::vector<std::vector<MentionRef>>;

template <typename Clustering>
Partition to_partition(const Clustering& c) {
  Partition out;
  for (auto& [label, members] : c.clusters()) out.push_back(members);
  return out;
}

// Clustering files: one JSON record per mention
// {dialogue_id, index, cluster_id[, label]}. Corpus files are accepted too;
// header records and unclustered utterances are skipped.
void write_clustering(const PredictedClustering& c, std::ostream& out);
PredictedClustering read_clustering(std::istream& in);
PredictedClustering load_clustering(const std::filesystem::path& path);

}  // namespace delichain
