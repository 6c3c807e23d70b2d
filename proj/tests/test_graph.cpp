#include <gtest/gtest.h>

#include <sstream>

#include "delichain/graph.hpp"
#include "delichain/corpus.hpp"
#include "fixtures.hpp"

using namespace delichain;
using fixture::C;
using fixture::P;

namespace {

std::vector<std::pair<int, int>> edge_indices(const DeliberationGraph& g) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.edges) out.emplace_back(e.from.index, e.to.index);
  return out;
}

}  // namespace

TEST(Graph, ImmediateSuccessorEdges) {
  const auto d = fixture::numbered("d", 9);
  GoldClustering g;
  fixture::add_cluster(g, "d", "k", {{1, C}, {3, C}, {7, P}});
  const auto graph = build_graph(d, g);
  EXPECT_EQ(edge_indices(graph), (std::vector<std::pair<int, int>>{{1, 3}, {3, 7}}));
  for (const auto& e : graph.edges) EXPECT_EQ(e.weight, 1.0);
  EXPECT_TRUE(validate_graph(graph).ok());
}

TEST(Graph, DisjointClustersGiveTwoComponents) {
  const auto d = fixture::numbered("d", 8);
  GoldClustering g;
  fixture::add_cluster(g, "d", "a", {{0, C}, {4, P}});
  fixture::add_cluster(g, "d", "b", {{2, C}, {3, C}, {6, P}});
  const auto comps = build_graph(d, g).components();
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0], (std::vector<MentionRef>{{"d", 0}, {"d", 4}}));
  EXPECT_EQ(comps[1], (std::vector<MentionRef>{{"d", 2}, {"d", 3}, {"d", 6}}));
}

TEST(Graph, ComponentsRecoverClusters) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.between(4, 20);
    const auto d = fixture::numbered("d", n);
    PredictedClustering pc;
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(0.3)) continue;
      pc.assignments[{"d", i}] = "c" + std::to_string(rng.below(4));
      pc.labels[{"d", i}] = rng.bernoulli(0.5) ? P : C;
    }
    const auto graph = build_graph(d, pc);
    ASSERT_TRUE(validate_graph(graph).ok());
    auto expected = to_partition(pc);
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    ASSERT_EQ(graph.components(), expected);
  }
}

TEST(Graph, PredictedEdgesCarryLinkProbabilities) {
  const auto d = fixture::numbered("d", 5);
  PredictedClustering pc;
  pc.assignments = {{{"d", 1}, "x"}, {{"d", 4}, "x"}};
  pc.labels = {{{"d", 1}, C}, {{"d", 4}, P}};
  AdjacencyMatrix adj{"d", {{{1, 4}, 0.83}}};
  const auto graph = build_graph(d, pc, &adj);
  ASSERT_EQ(graph.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(graph.edges[0].weight, 0.83);
}

TEST(Graph, MemberOutsideDialogueIsAnError) {
  const auto d = fixture::numbered("d", 3);
  GoldClustering g;
  fixture::add_cluster(g, "d", "k", {{1, C}, {5, P}});
  EXPECT_THROW(build_graph(d, g), ValidationError);
}

TEST(Graph, BackwardEdgeIsCyclic) {
  DeliberationGraph g;
  g.vertices = {{{"d", 1}, C, "k"}, {{"d", 7}, P, "k"}};
  g.edges = {{{"d", 7}, {"d", 1}, 1.0}};
  const auto r = validate_graph(g);
  EXPECT_FALSE(r.acyclic);
  EXPECT_FALSE(r.ok());
}

TEST(Graph, CrossDialogueEdgesAreCounted) {
  DeliberationGraph g;
  g.vertices = {{{"a", 1}, C, "k"}, {{"b", 2}, P, "k"}};
  g.edges = {{{"a", 1}, {"b", 2}, 1.0}};
  EXPECT_GT(validate_graph(g).cross_dialogue_edges, 0);
}

TEST(Graph, SplitChainIsNotWeaklyConnected) {
  DeliberationGraph g;
  g.vertices = {{{"d", 1}, C, "k"}, {{"d", 2}, C, "k"}, {{"d", 3}, P, "k"}};
  g.edges = {{{"d", 1}, {"d", 2}, 1.0}};
  EXPECT_FALSE(validate_graph(g).weakly_connected_per_chain);
}

TEST(Graph, ClosureIsIdempotent) {
  const EdgeSet e = {{{"d", 1}, {"d", 2}}, {{"d", 2}, {"d", 5}}, {{"d", 5}, {"d", 6}}};
  const auto closed = transitive_closure(e);
  EXPECT_EQ(closed.size(), 6u);
  EXPECT_TRUE(closed.count({{"d", 1}, {"d", 6}}));
  EXPECT_EQ(transitive_closure(closed), closed);
}

TEST(Chains, RootAndTerminal) {
  const auto d = fixture::numbered("d", 10);
  GoldClustering g;
  fixture::add_cluster(g, "d", "a", {{2, C}, {5, P}});
  fixture::add_cluster(g, "d", "b", {{1, C}, {4, P}, {9, P}});
  const auto chains = chains_from_clusters(g, d);
  ASSERT_EQ(chains.size(), 2u);
  EXPECT_EQ(chains[0].cluster_label, "b");
  EXPECT_EQ(chains[0].root, 1);
  EXPECT_EQ(chains[0].terminal, 9);
  EXPECT_EQ(chains[1].root, 2);
  EXPECT_EQ(chains[1].terminal, 5);
  EXPECT_FALSE(chains[1].degenerate);
}

TEST(Chains, AllCausalClusterIsDegenerate) {
  const auto d = fixture::numbered("d", 6);
  PredictedClustering pc;
  pc.assignments = {{{"d", 0}, "x"}, {{"d", 3}, "x"}, {{"d", 4}, "y"}};
  pc.labels = {{{"d", 0}, C}, {{"d", 3}, C}, {{"d", 4}, P}};
  const auto chains = chains_from_clusters(pc, d);
  ASSERT_EQ(chains.size(), 1u);  // the singleton is not a chain
  EXPECT_TRUE(chains[0].degenerate);
  EXPECT_FALSE(chains[0].terminal.has_value());
}

TEST(Chains, ExampleChainEndsInItsProbingQuestion) {
  const auto d = fixture::dialogue("w", {"You have to at least select 7 and A", "hmm", "Can you explain why?"});
  GoldClustering g;
  fixture::add_cluster(g, "w", "k", {{0, C}, {2, P}});
  const auto chains = chains_from_clusters(g, d);
  ASSERT_EQ(chains.size(), 1u);
  EXPECT_EQ(chains[0].terminal, 2);
  EXPECT_EQ(chains[0].root, 0);
}

TEST(Chains, ExportRoundTrips) {
  const auto d = fixture::numbered("d", 10);
  GoldClustering g;
  fixture::add_cluster(g, "d", "b", {{1, C}, {4, P}, {9, P}});
  PredictedClustering pc;
  pc.assignments = {{{"d", 0}, "x"}, {{"d", 3}, "x"}};
  pc.labels = {{{"d", 0}, C}, {{"d", 3}, C}};
  auto chains = chains_from_clusters(g, d);
  const auto more = chains_from_clusters(pc, d);
  chains.insert(chains.end(), more.begin(), more.end());
  std::stringstream ss;
  write_chains(chains, ss);
  EXPECT_EQ(read_chains(ss), chains);
}

TEST(Chains, MembersStrictlyIncrease) {
  SynthConfig cfg;
  cfg.n_dialogues = 20;
  const Corpus c = synthesize_corpus(cfg, 9);
  for (const auto& d : c.dialogues)
    for (const auto& ch : chains_from_clusters(c.gold.restricted_to(d.id), d))
      for (std::size_t k = 1; k < ch.members.size(); ++k) ASSERT_LT(ch.members[k - 1].index, ch.members[k].index);
}
