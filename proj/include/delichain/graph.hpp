#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "delichain/clustering.hpp"
#include "delichain/corpus.hpp"

namespace delichain {

struct GraphVertex {
  MentionRef ref;
  Role role = Role::Causal;
  std::string chain;  // cluster label the vertex belongs to

  bool operator==(const GraphVertex&) const = default;
};

// Directed antecedent -> consequent link. Weight is the causal influence of
// the link: 1.0 for gold edges, the link probability for predicted ones.
struct GraphEdge {
  MentionRef from;
  MentionRef to;
  double weight = 1.0;

  bool operator==(const GraphEdge&) const = default;
};

// Weighted directed graph over interventions. Within each chain, edges follow
// the immediate temporal successor, the smallest edge set whose transitive
// closure connects the whole chain.
struct DeliberationGraph {
  std::vector<GraphVertex> vertices;  // sorted by ref
  std::vector<GraphEdge> edges;

  // Weakly connected components, each sorted by ref; ordered by first member.
  std::vector<std::vector<MentionRef>> components() const;

  // The temporal traversal order of one chain (root first).
  std::vector<MentionRef> order(const std::string& chain) const;
};

struct ValidationReport {
  bool acyclic = true;                     // every edge points forward in time
  bool weakly_connected_per_chain = true;  // each chain is one component
  int cross_dialogue_edges = 0;

  bool ok() const { return acyclic && weakly_connected_per_chain && cross_dialogue_edges == 0; }
};

namespace detail {
DeliberationGraph build_graph(const Dialogue& dialogue, const std::map<MentionRef, std::string>& assignments,
                              const std::map<MentionRef, Role>& labels, const AdjacencyMatrix* weights);
}

// Throws ValidationError when a cluster member lies outside the dialogue.
// Only the clustering entries for this dialogue are used.
template <typename Clustering>
DeliberationGraph build_graph(const Dialogue& dialogue, const Clustering& clustering,
                              const AdjacencyMatrix* weights = nullptr) {
  return detail::build_graph(dialogue, clustering.assignments, clustering.labels, weights);
}

ValidationReport validate_graph(const DeliberationGraph& graph);

using EdgeSet = std::set<std::pair<MentionRef, MentionRef>>;

// All (a, b) with b reachable from a along directed edges.
EdgeSet transitive_closure(const EdgeSet& edges);
EdgeSet edge_set(const DeliberationGraph& graph);

struct ChainMember {
  int index = 0;
  Role role = Role::Causal;

  bool operator==(const ChainMember&) const = default;
};

struct DeliberationChain {
  std::string dialogue_id;
  std::string cluster_label;
  std::vector<ChainMember> members;  // strictly increasing index
  std::optional<int> root;           // earliest causal member
  std::optional<int> terminal;       // latest probing member
  bool degenerate = false;           // no probing or no causal member

  bool operator==(const DeliberationChain&) const = default;
};

namespace detail {
std::vector<DeliberationChain> chains_from_clusters(const std::map<MentionRef, std::string>& assignments,
                                                    const std::map<MentionRef, Role>& labels,
                                                    const Dialogue& dialogue);
}

// One chain per cluster with at least two members, ordered by first member.
template <typename Clustering>
std::vector<DeliberationChain> chains_from_clusters(const Clustering& clustering, const Dialogue& dialogue) {
  return detail::chains_from_clusters(clustering.assignments, clustering.labels, dialogue);
}

// JSON-lines chain export: {dialogue_id, cluster_label, members:[{index,label}],
// root, terminal, degenerate}; root/terminal are null when absent.
void write_chains(const std::vector<DeliberationChain>& chains, std::ostream& out);
std::vector<DeliberationChain> read_chains(std::istream& in);

}  // namespace delichain
