#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "delichain/annotate.hpp"
#include "fixtures.hpp"

using namespace delichain;

namespace {

// Ca, Cb, Cc at 0..2, then probings P1 = 3 and P2 = 4.
const Dialogue kDlg =
    fixture::dialogue("d", {"seven is odd", "we need the A", "what about K", "why turn the seven?", "and the K?"});
const std::vector<MentionRef> kProbings{{"d", 3}, {"d", 4}};

std::set<std::set<int>> clusters_of(const GoldMap& g) {
  std::map<std::string, std::set<int>> by;
  for (const auto& [m, label] : g.labels) by[label].insert(m.index);
  std::set<std::set<int>> out;
  for (auto& [label, members] : by) out.insert(members);
  return out;
}

GoldMap run(MockAnnotator& mock) {
  return gold_cluster_mapping(std::span<const Dialogue>(&kDlg, 1), kProbings, mock);
}

// Records the context each call receives.
class SpyAnnotator : public AnnotatorClient {
 public:
  std::vector<std::pair<int, std::vector<int>>> seen;
  std::string complete(const Utterance& probing, std::span<const Utterance> context, PromptTemplate) override {
    std::vector<int> idx;
    for (const auto& u : context) idx.push_back(u.index);
    seen.emplace_back(probing.index, idx);
    return "CAUSAL: " + std::to_string(probing.index - 1) + "\n";
  }
};

}  // namespace

TEST(Prompt, ListsNumberedCandidates) {
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(0, 3);
  const auto prompt = render_prompt(kDlg.at(3), ctx, PromptTemplate::CausalExtraction);
  EXPECT_NE(prompt.find("[0] s0: seven is odd\n"), std::string::npos);
  EXPECT_NE(prompt.find("[1] s1: we need the A\n"), std::string::npos);
  EXPECT_NE(prompt.find("[2] s2: what about K\n"), std::string::npos);
  EXPECT_NE(prompt.find("[3] s0: why turn the seven?"), std::string::npos);
  EXPECT_NE(prompt.find("CAUSAL: <number> | RATIONALE:"), std::string::npos);
}

TEST(Prompt, ProbingDetectionAsksYesNo) {
  const auto prompt = render_prompt(kDlg.at(0), {}, PromptTemplate::ProbingDetection);
  EXPECT_NE(prompt.find("PROBING: yes"), std::string::npos);
  EXPECT_NE(prompt.find("[0] s0: seven is odd"), std::string::npos);
}

TEST(Prompt, EmptyContextIsRejected) {
  EXPECT_THROW(render_prompt(kDlg.at(3), {}, PromptTemplate::CausalExtraction), ValidationError);
}

TEST(Prompt, LaterContextIsRejected) {
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(3, 2);
  EXPECT_THROW(render_prompt(kDlg.at(3), ctx, PromptTemplate::CausalExtraction), ValidationError);
}

TEST(Reply, ParsesCausalLines) {
  const auto r = parse_reply("CAUSAL: 2 | RATIONALE: it names K\ncausal: [0]\nchatter\n", PromptTemplate::CausalExtraction);
  EXPECT_EQ(r.causal_refs, (std::vector<int>{2, 0}));
  EXPECT_EQ(r.rationales, (std::vector<std::string>{"it names K", ""}));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Reply, NoneIsQuiet) {
  const auto r = parse_reply("NONE", PromptTemplate::CausalExtraction);
  EXPECT_TRUE(r.causal_refs.empty());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Reply, GarbageGivesEmptyRefsAndAWarning) {
  const auto r = parse_reply("I think the second one, maybe?", PromptTemplate::CausalExtraction);
  EXPECT_TRUE(r.causal_refs.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Reply, ProbingDetection) {
  EXPECT_EQ(parse_reply("PROBING: Yes", PromptTemplate::ProbingDetection).probing, std::optional<bool>(true));
  EXPECT_EQ(parse_reply("probing: no.", PromptTemplate::ProbingDetection).probing, std::optional<bool>(false));
  EXPECT_FALSE(parse_reply("CAUSAL: 1", PromptTemplate::ProbingDetection).probing.has_value());
}

TEST(Mapping, SharedCausalJoinsBothProbings) {
  MockAnnotator mock;
  mock.script("d#3", {0, 1}).script("d#4", {1, 2});
  const auto g = run(mock);
  EXPECT_EQ(clusters_of(g), (std::set<std::set<int>>{{0, 1, 2, 3, 4}}));
  EXPECT_EQ(g.collisions, 0);
}

TEST(Mapping, DisjointCausesGiveFreshLabels) {
  MockAnnotator mock;
  mock.script("d#3", {0}).script("d#4", {2});
  const auto g = run(mock);
  EXPECT_EQ(clusters_of(g), (std::set<std::set<int>>{{0, 3}, {2, 4}}));
  EXPECT_EQ(g.labels.at({"d", 0}), "d-g0");
  EXPECT_EQ(g.labels.at({"d", 2}), "d-g1");
}

TEST(Mapping, ProbingCitingAnEarlierProbingMerges) {
  MockAnnotator mock;
  mock.script("d#3", {0}).script("d#4", {3});
  EXPECT_EQ(clusters_of(run(mock)), (std::set<std::set<int>>{{0, 3, 4}}));
}

TEST(Mapping, UnlabelledEarlierProbingIsAdopted) {
  MockAnnotator mock;
  mock.script("d#3", {}).script("d#4", {3, 1});
  const auto g = run(mock);
  EXPECT_EQ(clusters_of(g), (std::set<std::set<int>>{{1, 3, 4}}));
}

TEST(Mapping, OutOfContextRefsAreSkipped) {
  MockAnnotator mock;
  mock.script("d#3", {0, 3, 7});
  const auto g = run(mock);
  EXPECT_EQ(clusters_of(g), (std::set<std::set<int>>{{0, 3}}));
  EXPECT_EQ(g.responses.front().warnings.size(), 2u);
}

TEST(Mapping, ToGoldAssignsRoles) {
  MockAnnotator mock;
  mock.script("d#3", {0}).script("d#4", {3});
  const auto gold = run(mock).to_gold(kProbings);
  EXPECT_EQ(gold.role({"d", 0}), Role::Causal);
  EXPECT_EQ(gold.role({"d", 3}), Role::Probing);
  EXPECT_EQ(gold.role({"d", 4}), Role::Probing);
  EXPECT_EQ(gold.role({"d", 1}), Role::Neither);
  EXPECT_EQ(gold.clusters().size(), 1u);
}

TEST(Mapping, OutOfOrderProbingsAreRejected) {
  MockAnnotator mock;
  const std::vector<MentionRef> backwards{{"d", 4}, {"d", 3}};
  EXPECT_THROW(gold_cluster_mapping(std::span<const Dialogue>(&kDlg, 1), backwards, mock), ValidationError);
}

TEST(Mapping, ContextOnlyHoldsEarlierUtterances) {
  const auto d = fixture::numbered("long", 40);
  std::vector<MentionRef> probes;
  for (int t : {5, 12, 30, 39}) probes.push_back({"long", t});
  SpyAnnotator spy;
  MappingOptions opts;
  opts.context_window = 10;
  gold_cluster_mapping(std::span<const Dialogue>(&d, 1), probes, spy, opts);
  ASSERT_EQ(spy.seen.size(), 4u);
  for (const auto& [t, ctx] : spy.seen) {
    ASSERT_FALSE(ctx.empty());
    EXPECT_EQ(ctx.back(), t - 1);
    EXPECT_EQ(ctx.front(), std::max(0, t - 10));
    for (int i : ctx) EXPECT_LT(i, t);
  }
}

TEST(Replay, ReproducesTheMap) {
  MockAnnotator mock;
  mock.script("d#3", {0, 1}).script_raw("d#4", "CAUSAL: 2 | RATIONALE: K again\nnoise\n");
  const auto live = run(mock);
  std::stringstream ss;
  const auto entries = live.transcript();
  write_transcript(entries, ss);
  const auto back = read_transcript(ss);
  ASSERT_EQ(back.size(), entries.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].utterance_id, entries[k].utterance_id);
    EXPECT_EQ(back[k].raw, entries[k].raw);
  }
  ReplayAnnotator replay(back);
  EXPECT_EQ(gold_cluster_mapping(std::span<const Dialogue>(&kDlg, 1), kProbings, replay), live);
}

TEST(Replay, MissingPromptIsAServiceError) {
  ReplayAnnotator replay(std::vector<TranscriptEntry>{});
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(0, 3);
  EXPECT_THROW(replay.complete(kDlg.at(3), ctx, PromptTemplate::CausalExtraction), ServiceError);
}

TEST(Mapping, WorkersDoNotChangeTheResult) {
  SynthConfig cfg;
  cfg.n_dialogues = 6;
  const Corpus c = synthesize_corpus(cfg, 21);
  MockAnnotator mock;
  std::vector<MentionRef> probes;
  for (const auto& d : c.dialogues)
    for (int t : c.gold.interventions(d.id)) {
      if (c.gold.role({d.id, t}) != Role::Probing) continue;
      probes.push_back({d.id, t});
      std::vector<int> refs;
      for (const auto& m : c.gold.clusters().at(*c.gold.cluster_of({d.id, t})))
        if (m.index < t) refs.push_back(m.index);
      mock.script(utterance_id(d.id, t), refs);
    }
  MappingOptions one, four;
  four.workers = 4;
  EXPECT_EQ(gold_cluster_mapping(c.dialogues, probes, mock, one), gold_cluster_mapping(c.dialogues, probes, mock, four));
}

TEST(Http, RetriesThenSucceeds) {
  ::setenv("DELICHAIN_TEST_KEY", "secret", 1);
  HttpAnnotatorConfig cfg;
  cfg.api_key_env = "DELICHAIN_TEST_KEY";
  int calls = 0;
  std::vector<std::chrono::milliseconds> sleeps;
  std::string auth;
  HttpAnnotator client(
      cfg,
      [&](const std::string&, const std::map<std::string, std::string>& headers, const std::string& body) {
        ++calls;
        auth = headers.at("Authorization");
        EXPECT_NE(body.find("\"temperature\":0"), std::string::npos);
        if (calls < 3) return HttpResponse{503, "busy"};
        return HttpResponse{200, R"({"choices":[{"message":{"role":"assistant","content":"CAUSAL: 1"}}]})"};
      },
      [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(0, 3);
  EXPECT_EQ(client.complete(kDlg.at(3), ctx, PromptTemplate::CausalExtraction), "CAUSAL: 1");
  EXPECT_EQ(auth, "Bearer secret");
  const auto log = client.log();
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].status, 503);
  EXPECT_EQ(log[2].status, 200);
  EXPECT_EQ(log[2].attempt, 3);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)}));
}

TEST(Http, GivesUpAfterMaxAttempts) {
  ::setenv("DELICHAIN_TEST_KEY", "secret", 1);
  HttpAnnotatorConfig cfg;
  cfg.api_key_env = "DELICHAIN_TEST_KEY";
  cfg.max_attempts = 2;
  HttpAnnotator client(
      cfg, [](const std::string&, const std::map<std::string, std::string>&, const std::string&) -> HttpResponse {
        throw std::runtime_error("connection refused");
      },
      [](std::chrono::milliseconds) {});
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(0, 3);
  EXPECT_THROW(client.complete(kDlg.at(3), ctx, PromptTemplate::CausalExtraction), ServiceError);
  EXPECT_EQ(client.log().size(), 2u);
}

TEST(Http, MalformedBodyIsTreatedAsEmpty) {
  ::setenv("DELICHAIN_TEST_KEY", "secret", 1);
  HttpAnnotatorConfig cfg;
  cfg.api_key_env = "DELICHAIN_TEST_KEY";
  HttpAnnotator client(
      cfg, [](const std::string&, const std::map<std::string, std::string>&, const std::string&) {
        return HttpResponse{200, "{\"unexpected\":true}"};
      },
      [](std::chrono::milliseconds) {});
  const auto ctx = std::span<const Utterance>(kDlg.utterances).subspan(0, 3);
  EXPECT_EQ(client.complete(kDlg.at(3), ctx, PromptTemplate::CausalExtraction), "");
  EXPECT_EQ(client.warnings().size(), 1u);
}

TEST(Http, MissingKeyIsAConfigError) {
  ::unsetenv("DELICHAIN_TEST_MISSING_KEY");
  HttpAnnotatorConfig cfg;
  cfg.api_key_env = "DELICHAIN_TEST_MISSING_KEY";
  EXPECT_THROW(HttpAnnotator{cfg}, ConfigError);
}

TEST(Detect, UsesTheProbingTemplate) {
  MockAnnotator mock;
  mock.mark_probing("d#3").mark_probing("d#4");
  EXPECT_EQ(detect_probing(std::span<const Dialogue>(&kDlg, 1), mock), kProbings);
}
