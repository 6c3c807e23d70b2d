#include "delichain/pairs.hpp"

#include <algorithm>
#include <ostream>

#include <nlohmann/json.hpp>

#include "delichain/text.hpp"

namespace delichain {

std::vector<LabeledPair> generate_training_pairs(const Dialogue& dialogue, const GoldClustering& gold, int window) {
  if (window < 1) throw ConfigError("window must be >= 1");
  std::vector<LabeledPair> out;
  const int n = static_cast<int>(dialogue.size());
  for (int j = 1; j < n; ++j) {
    const MentionRef mj{dialogue.id, j};
    const auto cj = gold.cluster_of(mj);
    for (int i = std::max(0, j - window); i < j; ++i) {
      const MentionRef mi{dialogue.id, i};
      const auto ci = gold.cluster_of(mi);
      const int y = (ci && cj && *ci == *cj) ? 1 : 0;
      out.push_back(LabeledPair{dialogue.id, i, j, y, gold.role(mi), gold.role(mj)});
    }
  }
  return out;
}

std::string_view PairText::antecedent_text() const {
  return std::string_view(rendered).substr(antecedent_span.first, antecedent_span.second - antecedent_span.first);
}

std::string_view PairText::consequent_text() const {
  return std::string_view(rendered).substr(consequent_span.first, consequent_span.second - consequent_span.first);
}

namespace {

struct Line {
  int index;
  bool marked;
  std::vector<std::string> speaker;  // speaker tokens plus ":"
  std::vector<std::string> text;     // utterance tokens (markers stripped)
  std::size_t tokens() const { return speaker.size() + text.size() + (marked ? 2 : 0); }
};

Line make_line(const Utterance& u, bool marked) {
  Line line{u.index, marked, tokenize(u.speaker), {}};
  line.speaker.emplace_back(":");
  for (auto& t : tokenize(u.text))
    if (t != kMarkOpen && t != kMarkClose) line.text.push_back(std::move(t));
  return line;
}

}  // namespace

PairText assemble_pair_text(const Dialogue& dialogue, int i, int j, int k, int max_sequence_len) {
  if (!(0 <= i && i < j && static_cast<std::size_t>(j) < dialogue.size()))
    throw ConfigError("pair (" + std::to_string(i) + ", " + std::to_string(j) + ") is not an antecedent pair of '" +
                      dialogue.id + "'");
  if (k < 0 || max_sequence_len < 1) throw ConfigError("context depth must be >= 0 and max length >= 1");

  std::vector<Line> lines;
  if (i < j - k) lines.push_back(make_line(dialogue.at(i), true));
  for (int c = std::max(0, j - k); c < j; ++c) lines.push_back(make_line(dialogue.at(c), c == i));
  lines.push_back(make_line(dialogue.at(j), true));

  std::size_t total = 0;
  for (const auto& l : lines) total += l.tokens();
  const auto budget = static_cast<std::size_t>(max_sequence_len);
  for (std::size_t li = 0; total > budget && li < lines.size();) {
    auto& l = lines[li];
    if (l.marked) {
      ++li;
      continue;
    }
    if (!l.text.empty()) {
      l.text.erase(l.text.begin());
      --total;
    } else {
      total -= l.speaker.size();
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(li));
    }
  }
  if (total > budget)
    throw TruncationError("marked utterances alone need " + std::to_string(total) + " tokens, budget is " +
                          std::to_string(budget));

  PairText out;
  out.token_count = total;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& l = lines[li];
    if (li) out.rendered += '\n';
    out.rendered += join_tokens(l.speaker);
    if (l.marked) {
      out.rendered += ' ';
      out.rendered += kMarkOpen;
      out.rendered += ' ';
    } else if (!l.text.empty()) {
      out.rendered += ' ';
    }
    const std::size_t begin = out.rendered.size();
    out.rendered += join_tokens(l.text);
    const std::size_t end = out.rendered.size();
    if (l.marked) {
      if (!l.text.empty()) out.rendered += ' ';
      out.rendered += kMarkClose;
      (l.index == j ? out.consequent_span : out.antecedent_span) = {begin, end};
    }
  }
  return out;
}

PairStats pair_statistics(std::span<const LabeledPair> pairs) {
  PairStats s;
  for (const auto& p : pairs) (p.y ? s.positives : s.negatives) += 1;
  const long total = s.positives + s.negatives;
  s.ratio = total ? static_cast<double>(s.positives) / static_cast<double>(total) : 0.0;
  return s;
}

WindowSweep sweep_window(const Corpus& dev, std::span<const int> candidates, double min_ratio) {
  if (candidates.empty()) throw ConfigError("window sweep needs at least one candidate");
  long gold_links = 0;
  for (const auto& [label, members] : dev.gold.clusters())
    gold_links += static_cast<long>(members.size() * (members.size() - 1) / 2);

  WindowSweep sweep;
  for (int w : candidates) {
    std::vector<LabeledPair> pairs;
    for (const auto& d : dev.dialogues) {
      auto p = generate_training_pairs(d, dev.gold, w);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    WindowSweepPoint pt{w, pair_statistics(pairs), 0.0};
    pt.positive_coverage = gold_links ? static_cast<double>(pt.stats.positives) / static_cast<double>(gold_links) : 0.0;
    sweep.points.push_back(pt);
  }
  const WindowSweepPoint* best = nullptr;
  for (const auto& pt : sweep.points)
    if (pt.stats.ratio >= min_ratio && (!best || pt.window > best->window)) best = &pt;
  if (!best)
    for (const auto& pt : sweep.points)
      if (!best || pt.stats.ratio > best->stats.ratio) best = &pt;
  sweep.chosen = best->window;
  return sweep;
}

void write_pairs(std::span<const LabeledPair> pairs, std::ostream& out) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json rec;
    rec["dialogue_id"] = p.dialogue_id;
    rec["i"] = p.i;
    rec["j"] = p.j;
    rec["y"] = p.y;
    rec["role_i"] = std::string(1, role_code(p.role_i));
    rec["role_j"] = std::string(1, role_code(p.role_j));
    out << rec.dump() << '\n';
  }
}

}  // namespace delichain
