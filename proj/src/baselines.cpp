#include "delichain/baselines.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace delichain {

std::string_view baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::Lexical: return "lexical";
    case BaselineKind::Entity: return "entity";
    case BaselineKind::Cosine: return "cosine";
  }
  return "lexical";
}

BaselineKind baseline_from_name(std::string_view name) {
  if (name == "lexical") return BaselineKind::Lexical;
  if (name == "entity") return BaselineKind::Entity;
  if (name == "cosine") return BaselineKind::Cosine;
  throw ConfigError("unknown baseline kind '" + std::string(name) + "'");
}

void BaselineSpec::validate() const {
  if (!std::isfinite(threshold)) throw ConfigError("baseline threshold must be finite");
  if (kind == BaselineKind::Cosine && !provider) throw ConfigError("cosine baseline needs an embedding provider");
}

double baseline_similarity(const BaselineSpec& spec, std::string_view a, std::string_view b) {
  switch (spec.kind) {
    case BaselineKind::Lexical:
      return lexical_ratio(a, b) / 100.0;
    case BaselineKind::Entity:
      return entity_iou(extract_entities(a, spec.schema, spec.entity_options),
                        extract_entities(b, spec.schema, spec.entity_options));
    case BaselineKind::Cosine: {
      if (!spec.provider) throw ConfigError("cosine baseline needs an embedding provider");
      return cosine(spec.provider->embed(a), spec.provider->embed(b));
    }
  }
  return 0.0;
}

std::vector<CalibrationPair> calibration_pairs(const Corpus& dev, CalibrationPopulation population) {
  std::vector<CalibrationPair> out;
  for (const auto& d : dev.dialogues) {
    for (const auto& u : d.utterances) {
      const MentionRef p{d.id, u.index};
      if (dev.gold.role(p) != Role::Probing) continue;
      const auto cluster = dev.gold.cluster_of(p);
      for (int i = 0; i < u.index; ++i) {
        const MentionRef c{d.id, i};
        if (population == CalibrationPopulation::GoldLinked &&
            !(dev.gold.role(c) == Role::Causal && cluster && dev.gold.cluster_of(c) == cluster))
          continue;
        out.push_back(CalibrationPair{u.text, d.utterances[static_cast<std::size_t>(i)].text});
      }
    }
  }
  return out;
}

double calibrate(std::span<const CalibrationPair> pairs, const BaselineSpec& spec) {
  if (pairs.empty()) throw ConfigError("calibration needs a non-empty dev pair set");
  double total = 0.0;
  for (const auto& p : pairs) total += baseline_similarity(spec, p.probing, p.other);
  return total / static_cast<double>(pairs.size());
}

AdjacencyMatrix baseline_link(const Dialogue& dialogue, const BaselineSpec& spec, std::span<const int> mentions) {
  spec.validate();
  AdjacencyMatrix adj{dialogue.id, {}};
  for (std::size_t b = 0; b < mentions.size(); ++b)
    for (std::size_t a = 0; a < mentions.size(); ++a) {
      const int i = mentions[a], j = mentions[b];
      if (i >= j) continue;
      const double sim = baseline_similarity(spec, dialogue.at(i).text, dialogue.at(j).text);
      adj.links[{i, j}] = sim > spec.threshold ? 1.0 : 0.0;
    }
  return adj;
}

PredictedClustering run_baseline(const Corpus& corpus, const BaselineSpec& spec, MentionMode mentions) {
  PredictedClustering out;
  for (const auto& d : corpus.dialogues) {
    const auto ms = select_mentions(d, corpus.gold, mentions);
    auto part = cluster_links(baseline_link(d, spec, ms), ms, corpus.gold, 0.5);
    out.assignments.merge(part.assignments);
    out.labels.merge(part.labels);
  }
  return out;
}

std::string corpus_hash(const Corpus& corpus) {
  std::ostringstream ss;
  write_corpus(corpus, ss);
  return hex64(fnv1a64(ss.str()));
}

std::string calibration_to_json(const CalibrationArtifact& c) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(baseline_name(c.kind));
  j["threshold"] = c.threshold;
  j["dev_split_hash"] = c.dev_split_hash;
  return j.dump(2) + "\n";
}

CalibrationArtifact calibration_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return CalibrationArtifact{baseline_from_name(j.at("kind").get<std::string>()), j.at("threshold").get<double>(),
                               j.at("dev_split_hash").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed calibration artifact: ") + e.what(), 1);
  }
}

}  // namespace delichain
