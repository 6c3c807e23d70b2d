#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "delichain/inference.hpp"
#include "delichain/metrics.hpp"
#include "delichain/pipeline.hpp"
#include "fixtures.hpp"

using namespace delichain;
using fixture::C;
using fixture::P;

namespace {

PairScorer constant(double p) {
  return [p](const Dialogue&, int, int) { return Scores{p, p, p}; };
}

// Link probability 1 exactly for gold co-members.
PairScorer gold_scorer(const GoldClustering& gold) {
  return [&gold](const Dialogue& d, int i, int j) {
    const auto a = gold.cluster_of({d.id, i}), b = gold.cluster_of({d.id, j});
    return Scores{a && a == b ? 1.0 : 0.0, 0.5, 0.5};
  };
}

Corpus synth(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_dialogues = n;
  return synthesize_corpus(cfg, seed, "test");
}

GoldClustering four_mentions() {
  GoldClustering g;
  fixture::add_cluster(g, "d", "a", {{1, C}, {6, P}});
  fixture::add_cluster(g, "d", "b", {{2, C}, {3, P}});
  return g;
}

}  // namespace

TEST(Candidates, NaiveModeTakesAllMentionPairs) {
  const auto d = fixture::numbered("d", 8);
  const auto g = four_mentions();
  const auto pairs = candidate_pairs(d, g, MentionMode::GoldInterventions, PairMode::Naive, 0);
  EXPECT_EQ(pairs, (std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}, {1, 6}, {2, 6}, {3, 6}}));
}

TEST(Candidates, WindowOneKeepsAdjacentUtterances) {
  const auto d = fixture::numbered("d", 8);
  const auto g = four_mentions();
  EXPECT_EQ(candidate_pairs(d, g, MentionMode::GoldInterventions, PairMode::Windowed, 1),
            (std::vector<std::pair<int, int>>{{1, 2}, {2, 3}}));
  EXPECT_EQ(candidate_pairs(d, g, MentionMode::AllUtterances, PairMode::Windowed, 1).size(), 7u);
}

TEST(Pruning, BudgetIsFloorOfGTimesC) {
  std::vector<PairScore> scored;
  Rng rng(3);
  for (int j = 1; j < 20; ++j)
    for (int i = 0; i < j; ++i) scored.push_back({"d", i, j, rng.uniform(), rng.uniform(), rng.uniform()});
  EXPECT_EQ(prune_naive(scored, 10, 5.0).size(), 50u);
  EXPECT_EQ(prune_naive(scored, 10, 4.55).size(), 45u);
  EXPECT_THROW(prune_naive(scored, 0, 5.0), ConfigError);
  const auto kept = prune_naive(scored, 3, 2.0);
  for (std::size_t k = 1; k < kept.size(); ++k) EXPECT_GE(kept[k - 1].intervention(), kept[k].intervention());
}

TEST(Pruning, TiesGoToEarlierPairs) {
  const std::vector<PairScore> scored{{"d", 2, 5, 0.1, 0.5, 0.5}, {"d", 1, 5, 0.1, 0.5, 0.5},
                                      {"d", 0, 3, 0.1, 0.5, 0.5}, {"d", 0, 1, 0.1, 0.2, 0.2}};
  const auto kept = prune_naive(scored, 1, 2.0);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(std::make_pair(kept[0].i, kept[0].j), std::make_pair(0, 3));
  EXPECT_EQ(std::make_pair(kept[1].i, kept[1].j), std::make_pair(1, 5));
}

TEST(Clustering, ThresholdAndClosure) {
  const AdjacencyMatrix adj{"d", {{{0, 2}, 0.9}, {{2, 5}, 0.5}, {{5, 7}, 0.49}, {{1, 7}, 0.7}}};
  const std::vector<int> ms{0, 1, 2, 5, 7};
  const auto pc = cluster_links(adj, ms, GoldClustering{});
  const auto part = to_partition(pc);
  std::set<std::vector<int>> got;
  for (const auto& c : part) {
    std::vector<int> idx;
    for (const auto& m : c) idx.push_back(m.index);
    got.insert(idx);
  }
  EXPECT_EQ(got, (std::set<std::vector<int>>{{0, 2, 5}, {1, 7}}));
  EXPECT_EQ(pc.assignments.at({"d", 5}), "d/m0");
  EXPECT_THROW(cluster_links(adj, ms, GoldClustering{}, 1.0), ConfigError);
}

TEST(Clustering, UnlinkedMentionsStaySingletons) {
  const AdjacencyMatrix adj{"d", {}};
  const std::vector<int> ms{3, 4};
  EXPECT_EQ(to_partition(cluster_links(adj, ms, GoldClustering{})).size(), 2u);
}

TEST(Predict, GoldScorerReproducesGold) {
  const Corpus c = synth(10, 31);
  InferenceConfig cfg;
  cfg.window = 1000;
  const auto pred = predict_corpus(c, gold_scorer(c.gold), cfg);
  const auto r = score(gold_partition(c), to_partition(pred.clustering));
  EXPECT_DOUBLE_EQ(r.conll_f1, 1.0);
}

TEST(Predict, ConstantZeroGivesNoChains) {
  const Corpus c = synth(5, 32);
  const auto pred = predict_corpus(c, constant(0.0), InferenceConfig{});
  EXPECT_TRUE(pred.chains.empty());
}

TEST(Predict, ConstantOneGivesOneChainPerDialogue) {
  const Corpus c = synth(5, 33);
  InferenceConfig cfg;
  cfg.mode = PairMode::Naive;
  cfg.chain_size_stat = 1000;
  const auto pred = predict_corpus(c, constant(1.0), cfg);
  EXPECT_EQ(pred.chains.size(), c.dialogues.size());
}

TEST(Predict, NaivePruningCapsLinkedPairs) {
  const Corpus c = synth(5, 34);
  InferenceConfig cfg;
  cfg.mode = PairMode::Naive;
  cfg.chain_size_stat = chain_size_stat(c);
  for (const auto& d : c.dialogues) {
    const auto p = predict_chains(d, c.gold, constant(0.7), cfg);
    const auto g = static_cast<double>(c.gold.interventions(d.id).size());
    EXPECT_LE(static_cast<double>(p.scores.size()), std::floor(g * cfg.chain_size_stat));
  }
}

TEST(Predict, EvaluationOrderDoesNotMatter) {
  const Corpus c = synth(8, 35);
  // Deterministic pseudo-random link scores keyed by the pair.
  const PairScorer hashed = [](const Dialogue& d, int i, int j) {
    const double u = static_cast<double>(fnv1a64(d.id + ":" + std::to_string(i) + ":" + std::to_string(j)) % 1000) / 1000.0;
    return Scores{u, u, u};
  };
  InferenceConfig cfg;
  const auto a = predict_corpus(c, hashed, cfg, 1);
  const auto b = predict_corpus(c, hashed, cfg, 4);
  EXPECT_EQ(a.clustering, b.clustering);
  EXPECT_EQ(a.scores, b.scores);
  Corpus reversed = c;
  std::reverse(reversed.dialogues.begin(), reversed.dialogues.end());
  EXPECT_EQ(predict_corpus(reversed, hashed, cfg).clustering, a.clustering);
}

TEST(Predict, JointScorerRejectsDimensionMismatch) {
  const JointScorerModel m(8, {4}, LossWeights{}, 1);
  const HashedBowProvider prov(16);
  EXPECT_THROW(joint_scorer(m, prov), ShapeError);
}

TEST(Predict, ReversedFeatureSwapsSpans) {
  const auto d = fixture::dialogue("d", {"seven is odd", "ok", "why seven"});
  const HashedBowProvider prov;
  const auto t = assemble_pair_text(d, 0, 2);
  const auto f = pair_feature(t, prov), r = reversed_pair_feature(t, prov);
  EXPECT_TRUE(std::equal(f.probing().begin(), f.probing().end(), r.causal().begin()));
  EXPECT_TRUE(std::equal(f.context().begin(), f.context().end(), r.context().begin()));
}
