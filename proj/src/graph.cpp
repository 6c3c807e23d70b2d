#include "delichain/graph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

namespace delichain {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::map<MentionRef, std::size_t> index_vertices(const std::vector<GraphVertex>& vs) {
  std::map<MentionRef, std::size_t> pos;
  for (std::size_t i = 0; i < vs.size(); ++i) pos.emplace(vs[i].ref, i);
  return pos;
}

}  // namespace

std::vector<std::vector<MentionRef>> DeliberationGraph::components() const {
  const auto pos = index_vertices(vertices);
  DisjointSets sets(vertices.size());
  for (const auto& e : edges) {
    auto a = pos.find(e.from), b = pos.find(e.to);
    if (a != pos.end() && b != pos.end()) sets.unite(a->second, b->second);
  }
  std::map<std::size_t, std::vector<MentionRef>> groups;
  for (std::size_t i = 0; i < vertices.size(); ++i) groups[sets.find(i)].push_back(vertices[i].ref);
  std::vector<std::vector<MentionRef>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

std::vector<MentionRef> DeliberationGraph::order(const std::string& chain) const {
  std::vector<MentionRef> out;
  for (const auto& v : vertices)
    if (v.chain == chain) out.push_back(v.ref);
  std::sort(out.begin(), out.end());
  return out;
}

DeliberationGraph detail::build_graph(const Dialogue& dialogue, const std::map<MentionRef, std::string>& assignments,
                                      const std::map<MentionRef, Role>& labels, const AdjacencyMatrix* weights) {
  DeliberationGraph g;
  std::map<std::string, std::vector<MentionRef>> chains;
  for (const auto& [m, label] : assignments) {
    if (m.dialogue_id != dialogue.id) continue;
    if (m.index < 0 || static_cast<std::size_t>(m.index) >= dialogue.size())
      throw ValidationError("cluster '" + label + "' member " + to_string(m) + " lies outside dialogue '" +
                            dialogue.id + "'");
    auto r = labels.find(m);
    g.vertices.push_back(GraphVertex{m, r == labels.end() ? Role::Neither : r->second, label});
    chains[label].push_back(m);
  }
  std::sort(g.vertices.begin(), g.vertices.end(),
            [](const GraphVertex& a, const GraphVertex& b) { return a.ref < b.ref; });
  for (auto& [label, members] : chains) {
    std::sort(members.begin(), members.end());
    for (std::size_t k = 1; k < members.size(); ++k) {
      double w = 1.0;
      if (weights) {
        auto it = weights->links.find({members[k - 1].index, members[k].index});
        if (it != weights->links.end()) w = it->second;
      }
      g.edges.push_back(GraphEdge{members[k - 1], members[k], w});
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const GraphEdge& a, const GraphEdge& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
  return g;
}

ValidationReport validate_graph(const DeliberationGraph& graph) {
  ValidationReport report;
  for (const auto& e : graph.edges) {
    if (e.from.dialogue_id != e.to.dialogue_id)
      ++report.cross_dialogue_edges;
    else if (e.from.index >= e.to.index)
      report.acyclic = false;
  }

  // Cycle check over the whole edge set (Kahn).
  std::map<MentionRef, int> indegree;
  std::map<MentionRef, std::vector<MentionRef>> succ;
  for (const auto& e : graph.edges) {
    indegree[e.from];
    ++indegree[e.to];
    succ[e.from].push_back(e.to);
  }
  std::deque<MentionRef> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto v = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& w : succ[v])
      if (--indegree[w] == 0) ready.push_back(w);
  }
  if (seen != indegree.size()) report.acyclic = false;

  const auto pos = index_vertices(graph.vertices);
  DisjointSets sets(graph.vertices.size());
  for (const auto& e : graph.edges) {
    auto a = pos.find(e.from), b = pos.find(e.to);
    if (a == pos.end() || b == pos.end()) continue;
    if (graph.vertices[a->second].chain != graph.vertices[b->second].chain) continue;
    sets.unite(a->second, b->second);
  }
  std::map<std::string, std::set<std::size_t>> roots;
  for (std::size_t i = 0; i < graph.vertices.size(); ++i) roots[graph.vertices[i].chain].insert(sets.find(i));
  for (const auto& [chain, r] : roots)
    if (r.size() != 1) report.weakly_connected_per_chain = false;
  return report;
}

EdgeSet edge_set(const DeliberationGraph& graph) {
  EdgeSet out;
  for (const auto& e : graph.edges) out.emplace(e.from, e.to);
  return out;
}

EdgeSet transitive_closure(const EdgeSet& edges) {
  std::map<MentionRef, std::vector<MentionRef>> succ;
  for (const auto& [a, b] : edges) succ[a].push_back(b);
  EdgeSet out;
  for (const auto& [start, unused] : succ) {
    std::set<MentionRef> visited;
    std::vector<MentionRef> stack = succ[start];
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (!visited.insert(v).second) continue;
      out.emplace(start, v);
      auto it = succ.find(v);
      if (it != succ.end()) stack.insert(stack.end(), it->second.begin(), it->second.end());
    }
  }
  return out;
}

std::vector<DeliberationChain> detail::chains_from_clusters(const std::map<MentionRef, std::string>& assignments,
                                                            const std::map<MentionRef, Role>& labels,
                                                            const Dialogue& dialogue) {
  std::map<std::string, std::vector<ChainMember>> groups;
  for (const auto& [m, label] : assignments) {
    if (m.dialogue_id != dialogue.id) continue;
    auto r = labels.find(m);
    groups[label].push_back(ChainMember{m.index, r == labels.end() ? Role::Neither : r->second});
  }
  std::vector<DeliberationChain> out;
  for (auto& [label, members] : groups) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    DeliberationChain chain{dialogue.id, label, std::move(members), std::nullopt, std::nullopt, false};
    for (const auto& m : chain.members) {
      if (m.role == Role::Causal && !chain.root) chain.root = m.index;
      if (m.role == Role::Probing) chain.terminal = m.index;
    }
    chain.degenerate = !chain.root || !chain.terminal;
    out.push_back(std::move(chain));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.members.front().index < b.members.front().index;
  });
  return out;
}

void write_chains(const std::vector<DeliberationChain>& chains, std::ostream& out) {
  for (const auto& c : chains) {
    nlohmann::ordered_json rec;
    rec["dialogue_id"] = c.dialogue_id;
    rec["cluster_label"] = c.cluster_label;
    auto members = nlohmann::ordered_json::array();
    for (const auto& m : c.members) {
      nlohmann::ordered_json mj;
      mj["index"] = m.index;
      mj["label"] = std::string(1, role_code(m.role));
      members.push_back(std::move(mj));
    }
    rec["members"] = std::move(members);
    rec["root"] = c.root ? nlohmann::ordered_json(*c.root) : nlohmann::ordered_json(nullptr);
    rec["terminal"] = c.terminal ? nlohmann::ordered_json(*c.terminal) : nlohmann::ordered_json(nullptr);
    rec["degenerate"] = c.degenerate;
    out << rec.dump() << '\n';
  }
}

std::vector<DeliberationChain> read_chains(std::istream& in) {
  std::vector<DeliberationChain> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DeliberationChain c;
      c.dialogue_id = j.at("dialogue_id").get<std::string>();
      c.cluster_label = j.at("cluster_label").get<std::string>();
      for (const auto& m : j.at("members"))
        c.members.push_back(ChainMember{m.at("index").get<int>(), role_from_code(m.at("label").get<std::string>())});
      if (!j.at("root").is_null()) c.root = j["root"].get<int>();
      if (!j.at("terminal").is_null()) c.terminal = j["terminal"].get<int>();
      c.degenerate = j.value("degenerate", false);
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed chain record: ") + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace delichain
