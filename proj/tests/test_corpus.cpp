#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "delichain/corpus.hpp"
#include "fixtures.hpp"

using namespace delichain;
using fixture::C;
using fixture::P;

namespace {

Corpus two_dialogue_fixture() {
  Corpus c;
  c.dialogues = {fixture::numbered("d1", 6), fixture::numbered("d2", 5)};
  fixture::add_cluster(c.gold, "d1", "a", {{0, C}, {2, P}});
  fixture::add_cluster(c.gold, "d1", "b", {{1, C}, {3, C}, {5, P}});
  fixture::add_cluster(c.gold, "d2", "c", {{1, C}, {4, P}});
  c.gold.labels[{"d2", 2}] = fixture::N;
  return c;
}

Corpus round_trip(const Corpus& c) {
  std::stringstream ss;
  write_corpus(c, ss);
  return read_corpus(ss);
}

}  // namespace

TEST(Corpus, FixtureRoundTripsWithTwoDialoguesAndThreeClusters) {
  const Corpus c = two_dialogue_fixture();
  const Corpus back = round_trip(c);
  EXPECT_EQ(back.dialogues.size(), 2u);
  EXPECT_EQ(back.gold.clusters().size(), 3u);
  EXPECT_EQ(back.dialogues, c.dialogues);
  EXPECT_EQ(back.gold.assignments, c.gold.assignments);
  for (const auto& [m, r] : c.gold.labels) EXPECT_EQ(back.gold.role(m), r);
}

TEST(Corpus, EmptyCorpusWritesOnlyTheHeader) {
  std::stringstream ss;
  write_corpus(Corpus{}, ss);
  const std::string s = ss.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1);
  EXPECT_NE(s.find("delichain-corpus"), std::string::npos);
  EXPECT_TRUE(round_trip(Corpus{}).dialogues.empty());
}

TEST(Corpus, SingletonClusterIsRejected) {
  Corpus c = two_dialogue_fixture();
  c.gold.assignments[{"d2", 0}] = "lonely";
  c.gold.labels[{"d2", 0}] = C;
  EXPECT_THROW(validate_corpus(c), ValidationError);
}

TEST(Corpus, CrossDialogueClusterIsRejected) {
  Corpus c = two_dialogue_fixture();
  c.gold.assignments[{"d2", 0}] = "a";
  c.gold.labels[{"d2", 0}] = C;
  EXPECT_THROW(validate_corpus(c), ValidationError);
}

TEST(Corpus, NeitherMemberIsRejected) {
  Corpus c = two_dialogue_fixture();
  c.gold.labels[{"d1", 0}] = fixture::N;
  EXPECT_THROW(validate_corpus(c), ValidationError);
}

TEST(Corpus, MalformedLineReportsLineNumber) {
  std::stringstream ss;
  write_corpus(two_dialogue_fixture(), ss);
  std::string text = ss.str();
  // corrupt the third line
  std::size_t pos = 0;
  for (int k = 0; k < 2; ++k) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{not json\n");
  std::istringstream in(text);
  try {
    read_corpus(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Corpus, LoadRejectsSingletonInFile) {
  std::istringstream in(
      R"({"dialogue_id":"d","index":0,"speaker":"a","text":"hi","label":"C","cluster_id":"x"})"
      "\n"
      R"({"dialogue_id":"d","index":1,"speaker":"b","text":"why?","label":"P","cluster_id":""})"
      "\n");
  EXPECT_THROW(read_corpus(in), ValidationError);
}

TEST(Corpus, GapInIndicesIsRejected) {
  std::istringstream in(
      R"({"dialogue_id":"d","index":0,"speaker":"a","text":"hi","label":"N","cluster_id":""})"
      "\n"
      R"({"dialogue_id":"d","index":2,"speaker":"b","text":"why?","label":"N","cluster_id":""})"
      "\n");
  EXPECT_THROW(read_corpus(in), ParseError);
}

TEST(Corpus, ReadsTabSeparatedFiles) {
  std::istringstream in(
      "dialogue_id\tindex\tspeaker\ttext\tlabel\tcluster_id\n"
      "g1\t0\tann\tE is a vowel\tC\tk1\n"
      "g1\t1\tbob\tok\tN\t\n"
      "g1\t2\tcid\twhy E?\tP\tk1\n");
  const Corpus c = read_corpus(in, Schema::Wtd);
  ASSERT_EQ(c.dialogues.size(), 1u);
  EXPECT_EQ(c.dialogues[0].task_schema, Schema::Wtd);
  EXPECT_EQ(c.dialogues[0].at(2).text, "why E?");
  EXPECT_EQ(c.gold.cluster_of({"g1", 0}), std::optional<std::string>("k1"));
  EXPECT_EQ(c.gold.role({"g1", 1}), fixture::N);
}

TEST(Corpus, UnicodeRoundTripProperty) {
  const std::vector<std::string> pieces = {"Zoë", "Łukasz", "李雷", "Ñandú", "ok", "\"quoted\"", "tab\there",
                                           "back\\slash", "émoji 🙂", "new\nline"};
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    Corpus c;
    const int nd = rng.between(1, 3);
    for (int d = 0; d < nd; ++d) {
      Dialogue dlg{"dlg-" + pieces[rng.below(pieces.size())] + std::to_string(d), {}, Schema::Delidata};
      const int n = rng.between(2, 6);
      for (int i = 0; i < n; ++i)
        dlg.utterances.push_back({utterance_id(dlg.id, i), pieces[rng.below(pieces.size())],
                                  pieces[rng.below(pieces.size())] + " " + pieces[rng.below(pieces.size())], i});
      c.gold.assignments[{dlg.id, 0}] = "k" + std::to_string(d);
      c.gold.labels[{dlg.id, 0}] = C;
      c.gold.assignments[{dlg.id, n - 1}] = "k" + std::to_string(d);
      c.gold.labels[{dlg.id, n - 1}] = P;
      c.dialogues.push_back(std::move(dlg));
    }
    c.split_name = trial % 2 ? "dev" : "test";
    const Corpus back = round_trip(c);
    ASSERT_EQ(back.dialogues, c.dialogues);
    ASSERT_EQ(back.gold.assignments, c.gold.assignments);
    ASSERT_EQ(back.split_name, c.split_name);
  }
}

TEST(Synth, SameSeedSameCorpus) {
  SynthConfig cfg;
  cfg.n_dialogues = 10;
  EXPECT_EQ(synthesize_corpus(cfg, 7), synthesize_corpus(cfg, 7));
  EXPECT_NE(synthesize_corpus(cfg, 7), synthesize_corpus(cfg, 8));
}

TEST(Synth, ShapeNearTargetsAndNoSingletons) {
  SynthConfig cfg;
  cfg.n_dialogues = 100;
  cfg.mean_dialogue_len = 33;
  cfg.mean_chain_len = 5;
  const Corpus c = synthesize_corpus(cfg, 11);
  validate_corpus(c);
  const auto st = corpus_statistics(c);
  EXPECT_NEAR(st.mean_dialogue_len, 33.0, 0.2 * 33.0);
  EXPECT_NEAR(st.mean_chain, 5.0, 0.2 * 5.0);
  EXPECT_GE(st.min_chain, 2);
  for (const auto& [label, members] : c.gold.clusters()) EXPECT_GE(members.size(), 2u);
}

TEST(Synth, RoundTrips) {
  SynthConfig cfg;
  cfg.n_dialogues = 5;
  const Corpus c = synthesize_corpus(cfg, 3, "dev");
  EXPECT_EQ(round_trip(c), c);
}

TEST(Synth, RejectsShortChains) {
  SynthConfig cfg;
  cfg.mean_chain_len = 1.5;
  EXPECT_THROW(synthesize_corpus(cfg, 1), ConfigError);
}

TEST(Corpus, InterventionsAreTemporallyOrdered) {
  const Corpus c = two_dialogue_fixture();
  EXPECT_EQ(c.gold.interventions("d1"), (std::vector<int>{0, 1, 2, 3, 5}));
  EXPECT_EQ(c.gold.interventions("d2"), (std::vector<int>{1, 4}));
}
