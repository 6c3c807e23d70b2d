#include "delichain/pipeline.hpp"

#include <algorithm>
#include <thread>

namespace delichain {

Labels pair_labels(const LabeledPair& p) {
  return Labels{static_cast<double>(p.y), p.role_j == Role::Probing ? 1.0 : 0.0,
                p.role_i == Role::Causal ? 1.0 : 0.0};
}

namespace {

std::vector<TrainExample> dialogue_examples(const Dialogue& d, const GoldClustering& gold,
                                            const EmbeddingProvider& provider, int window, ContextConfig context,
                                            bool bidirectional) {
  std::vector<TrainExample> out;
  for (const auto& p : generate_training_pairs(d, gold, window)) {
    const PairText text = assemble_pair_text(d, p.i, p.j, context.k, context.max_sequence_len);
    TrainExample ex{pair_feature(text, provider), pair_labels(p), std::nullopt, {}};
    if (bidirectional) {
      ex.reverse = reversed_pair_feature(text, provider);
      ex.reverse_labels = Labels{static_cast<double>(p.y), p.role_i == Role::Probing ? 1.0 : 0.0,
                                 p.role_j == Role::Causal ? 1.0 : 0.0};
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

std::vector<TrainExample> build_training_set(const Corpus& corpus, const EmbeddingProvider& provider, int window,
                                             ContextConfig context, bool bidirectional, unsigned workers) {
  if (window < 1) throw ConfigError("window must be >= 1");
  const std::size_t n = corpus.dialogues.size();
  std::vector<std::vector<TrainExample>> parts(n);
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  auto run = [&](std::size_t d) {
    parts[d] = dialogue_examples(corpus.dialogues[d], corpus.gold, provider, window, context, bidirectional);
  };
  if (w == 1) {
    for (std::size_t d = 0; d < n; ++d) run(d);
  } else {
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < w; ++t)
      threads.emplace_back([&, t] {
        try {
          for (std::size_t d = t; d < n; d += w) run(d);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<TrainExample> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

double chain_size_stat(const Corpus& corpus) {
  const auto clusters = corpus.gold.clusters();
  if (clusters.empty()) throw ValidationError("corpus has no gold chains");
  const Schema schema = corpus.dialogues.empty() ? Schema::Delidata : corpus.dialogues.front().task_schema;
  double total = 0.0, largest = 0.0;
  for (const auto& [label, members] : clusters) {
    total += static_cast<double>(members.size());
    largest = std::max(largest, static_cast<double>(members.size()));
  }
  return schema == Schema::Delidata ? total / static_cast<double>(clusters.size()) : largest;
}

void GradCheckOptions::validate() const {
  if (draws < 1) throw ConfigError("gradcheck draws must be >= 1");
  if (dimension < 1 || hidden < 1 || batch < 1) throw ConfigError("gradcheck sizes must be >= 1");
}

std::vector<GradCheckDraw> run_grad_checks(const GradCheckOptions& options) {
  options.validate();
  std::vector<GradCheckDraw> out;
  for (int d = 0; d < options.draws; ++d) {
    const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(d);
    Rng rng(seed);
    SynthConfig sc;
    sc.n_dialogues = 2;
    const Corpus corpus = synthesize_corpus(sc, seed);
    const HashedBowProvider provider(options.dimension);
    const bool bidi = d % 2 == 1;
    auto pool = build_training_set(corpus, provider, 4, {}, bidi);
    std::vector<TrainExample> batch;
    for (std::size_t b = 0; b < options.batch && !pool.empty(); ++b)
      batch.push_back(pool[rng.below(pool.size())]);

    const LossWeights alphas{rng.uniform(0.5, 1.5), rng.uniform(0.005, 0.5), rng.uniform(0.005, 0.5)};
    JointScorerModel model(options.dimension, {options.hidden}, alphas, seed);
    model.input_scale.resize(4 * options.dimension);
    for (auto& s : model.input_scale) s = rng.uniform(0.5, 4.0);
    out.push_back(GradCheckDraw{seed, bidi, grad_check(model, batch, options.step)});
  }
  return out;
}

}  // namespace delichain
