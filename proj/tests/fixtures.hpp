#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "delichain/corpus.hpp"

namespace fixture {

inline delichain::Dialogue dialogue(const std::string& id, const std::vector<std::string>& texts,
                                    delichain::Schema schema = delichain::Schema::Delidata) {
  delichain::Dialogue d{id, {}, schema};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const int idx = static_cast<int>(i);
    d.utterances.push_back({delichain::utterance_id(id, idx), "s" + std::to_string(i % 3), texts[i], idx});
  }
  return d;
}

inline delichain::Dialogue numbered(const std::string& id, int n) {
  std::vector<std::string> texts;
  for (int i = 0; i < n; ++i) texts.push_back("utterance number " + std::to_string(i));
  return dialogue(id, texts);
}

struct Member {
  int index;
  delichain::Role role;
};

// Adds one gold cluster to `gold`.
inline void add_cluster(delichain::GoldClustering& gold, const std::string& dlg, const std::string& label,
                        std::initializer_list<Member> members) {
  for (const auto& m : members) {
    gold.assignments[{dlg, m.index}] = label;
    gold.labels[{dlg, m.index}] = m.role;
  }
}

constexpr auto P = delichain::Role::Probing;
constexpr auto C = delichain::Role::Causal;
constexpr auto N = delichain::Role::Neither;

}  // namespace fixture
