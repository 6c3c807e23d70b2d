#include "delichain/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

namespace delichain {

std::vector<int> select_mentions(const Dialogue& dialogue, const GoldClustering& gold, MentionMode mode) {
  if (mode == MentionMode::GoldInterventions) return gold.interventions(dialogue.id);
  std::vector<int> all(dialogue.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

std::vector<std::pair<int, int>> candidate_pairs(const Dialogue& dialogue, const GoldClustering& gold,
                                                 MentionMode mentions, PairMode mode, int window) {
  if (mode == PairMode::Windowed && window < 1) throw ConfigError("window must be >= 1");
  const auto ms = select_mentions(dialogue, gold, mentions);
  std::vector<std::pair<int, int>> out;
  for (std::size_t b = 0; b < ms.size(); ++b)
    for (std::size_t a = 0; a < b; ++a)
      if (mode == PairMode::Naive || ms[b] - ms[a] <= window) out.emplace_back(ms[a], ms[b]);
  return out;
}

PairFeature reversed_pair_feature(const PairText& text, const EmbeddingProvider& provider) {
  PairText swapped = text;
  std::swap(swapped.antecedent_span, swapped.consequent_span);
  return pair_feature(swapped, provider);
}

PairScorer joint_scorer(const JointScorerModel& model, const EmbeddingProvider& provider, ContextConfig context,
                        bool bidirectional) {
  if (provider.dimension() != model.dimension)
    throw ShapeError("embedding dimension " + std::to_string(provider.dimension()) +
                     " does not match model dimension " + std::to_string(model.dimension));
  return [&model, &provider, context, bidirectional](const Dialogue& d, int i, int j) {
    const PairText text = assemble_pair_text(d, i, j, context.k, context.max_sequence_len);
    const PairFeature f = pair_feature(text, provider);
    if (!bidirectional) return forward(model, f);
    return forward_bidirectional(model, f, reversed_pair_feature(text, provider));
  };
}

std::vector<PairScore> score_candidates(const Dialogue& dialogue, std::span<const std::pair<int, int>> pairs,
                                        const PairScorer& scorer) {
  std::vector<PairScore> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    const Scores s = scorer(dialogue, i, j);
    out.push_back(PairScore{dialogue.id, i, j, s.link, s.probing, s.causal});
  }
  return out;
}

std::vector<PairScore> prune_naive(std::span<const PairScore> scored, int intervention_count, double chain_size_stat) {
  const double tau_real = static_cast<double>(intervention_count) * chain_size_stat;
  if (!(tau_real >= 1.0)) throw ConfigError("pruning budget tau = G * C must be positive");
  const auto tau = static_cast<std::size_t>(std::floor(tau_real));
  std::vector<PairScore> ranked(scored.begin(), scored.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const PairScore& a, const PairScore& b) {
    const double sa = a.intervention(), sb = b.intervention();
    if (sa != sb) return sa > sb;
    if (a.j != b.j) return a.j < b.j;
    return a.i < b.i;
  });
  if (ranked.size() > tau) ranked.resize(tau);
  return ranked;
}

AdjacencyMatrix to_adjacency(const std::string& dialogue_id, std::span<const PairScore> scored) {
  AdjacencyMatrix adj{dialogue_id, {}};
  for (const auto& s : scored) {
    if (s.i >= s.j) throw ValidationError("adjacency entries must be antecedent-ordered");
    adj.links[{s.i, s.j}] = s.link;
  }
  return adj;
}

AdjacencyMatrix score_pairs(const Dialogue& dialogue, std::span<const std::pair<int, int>> pairs,
                            const PairScorer& scorer) {
  const auto scored = score_candidates(dialogue, pairs, scorer);
  return to_adjacency(dialogue.id, scored);
}

PredictedClustering cluster_links(const AdjacencyMatrix& adjacency, std::span<const int> mentions,
                                  const GoldClustering& roles, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("link threshold must be in (0, 1)");
  std::vector<int> ms(mentions.begin(), mentions.end());
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  auto pos = [&](int idx) -> std::ptrdiff_t {
    auto it = std::lower_bound(ms.begin(), ms.end(), idx);
    return (it != ms.end() && *it == idx) ? it - ms.begin() : -1;
  };

  std::vector<std::size_t> parent(ms.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [ij, p] : adjacency.links) {
    if (p < threshold) continue;
    const auto a = pos(ij.first), b = pos(ij.second);
    if (a < 0 || b < 0) continue;
    auto ra = find(static_cast<std::size_t>(a)), rb = find(static_cast<std::size_t>(b));
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  PredictedClustering out;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const MentionRef m{adjacency.dialogue_id, ms[k]};
    out.assignments.emplace(m, adjacency.dialogue_id + "/m" + std::to_string(ms[find(k)]));
    out.labels.emplace(m, roles.role(m));
  }
  return out;
}

void InferenceConfig::validate() const {
  if (mode == PairMode::Windowed && window < 1) throw ConfigError("window must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("link threshold must be in (0, 1)");
  if (mode == PairMode::Naive && !(chain_size_stat > 0.0)) throw ConfigError("chain size statistic must be positive");
}

Prediction predict_chains(const Dialogue& dialogue, const GoldClustering& gold, const PairScorer& scorer,
                          const InferenceConfig& config) {
  config.validate();
  const auto mentions = select_mentions(dialogue, gold, config.mentions);
  const auto pairs = candidate_pairs(dialogue, gold, config.mentions, config.mode, config.window);
  Prediction out;
  out.scores = score_candidates(dialogue, pairs, scorer);
  if (config.mode == PairMode::Naive && !out.scores.empty()) {
    out.scores = prune_naive(out.scores, static_cast<int>(mentions.size()), config.chain_size_stat);
    std::sort(out.scores.begin(), out.scores.end(),
              [](const PairScore& a, const PairScore& b) { return std::tie(a.j, a.i) < std::tie(b.j, b.i); });
  }
  const auto adjacency = to_adjacency(dialogue.id, out.scores);
  out.clustering = cluster_links(adjacency, mentions, gold, config.threshold);
  out.chains = chains_from_clusters(out.clustering, dialogue);
  return out;
}

Prediction predict_corpus(const Corpus& corpus, const PairScorer& scorer, const InferenceConfig& config,
                          unsigned workers) {
  config.validate();
  const std::size_t n = corpus.dialogues.size();
  std::vector<Prediction> parts(n);
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    for (std::size_t d = 0; d < n; ++d) parts[d] = predict_chains(corpus.dialogues[d], corpus.gold, scorer, config);
  } else {
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < w; ++t)
      threads.emplace_back([&, t] {
        try {
          for (std::size_t d = t; d < n; d += w)
            parts[d] = predict_chains(corpus.dialogues[d], corpus.gold, scorer, config);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  Prediction all;
  for (auto& p : parts) {
    all.clustering.assignments.merge(p.clustering.assignments);
    all.clustering.labels.merge(p.clustering.labels);
    all.chains.insert(all.chains.end(), p.chains.begin(), p.chains.end());
    all.scores.insert(all.scores.end(), p.scores.begin(), p.scores.end());
  }
  return all;
}

void write_pair_scores(std::span<const PairScore> scores, std::ostream& out) {
  for (const auto& s : scores) {
    nlohmann::ordered_json rec;
    rec["dialogue_id"] = s.dialogue_id;
    rec["i"] = s.i;
    rec["j"] = s.j;
    rec["l_ij"] = s.link;
    rec["s_i"] = s.probing;
    rec["s_j"] = s.causal;
    out << rec.dump() << '\n';
  }
}

}  // namespace delichain
