#include "delichain/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace delichain {

double harmonic_mean(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// mention -> cluster position
std::map<MentionRef, std::size_t> membership(const Partition& p) {
  std::map<MentionRef, std::size_t> out;
  for (std::size_t c = 0; c < p.size(); ++c)
    for (const auto& m : p[c])
      if (!out.emplace(m, c).second) throw ValidationError("mention " + to_string(m) + " appears in two clusters");
  return out;
}

void check_universe(const std::map<MentionRef, std::size_t>& g, const std::map<MentionRef, std::size_t>& p) {
  if (g.size() != p.size()) throw ValidationError("gold and predicted partitions cover different mention sets");
  for (auto a = g.begin(), b = p.begin(); a != g.end(); ++a, ++b)
    if (a->first != b->first)
      throw ValidationError("mention " + to_string(a->first) + " is missing from one of the partitions");
}

// Sum over key clusters of (|K| - number of response parts K splits into).
std::pair<double, double> muc_counts(const Partition& key, const std::map<MentionRef, std::size_t>& response) {
  double num = 0, den = 0;
  for (const auto& k : key) {
    std::set<std::size_t> parts;
    for (const auto& m : k) parts.insert(response.at(m));
    num += static_cast<double>(k.size() - parts.size());
    den += static_cast<double>(k.size()) - 1.0;
  }
  return {num, den};
}

}  // namespace

Prf muc(const Partition& gold, const Partition& pred) {
  const auto gm = membership(gold), pm = membership(pred);
  check_universe(gm, pm);
  const auto [rn, rd] = muc_counts(gold, pm);
  const auto [pn, pd] = muc_counts(pred, gm);
  Prf out{ratio(rn, rd), ratio(pn, pd), 0.0};
  out.f1 = harmonic_mean(out.precision, out.recall);
  return out;
}

Prf b_cubed(const Partition& gold, const Partition& pred) {
  const auto gm = membership(gold), pm = membership(pred);
  check_universe(gm, pm);
  // overlap[g][p] = |G_g ∩ P_p|
  std::map<std::pair<std::size_t, std::size_t>, double> overlap;
  for (const auto& [m, g] : gm) overlap[{g, pm.at(m)}] += 1.0;
  double r = 0, p = 0;
  for (const auto& [m, g] : gm) {
    const std::size_t pc = pm.at(m);
    const double both = overlap[{g, pc}];
    r += both / static_cast<double>(gold[g].size());
    p += both / static_cast<double>(pred[pc].size());
  }
  const double n = static_cast<double>(gm.size());
  Prf out{ratio(r, n), ratio(p, n), 0.0};
  out.f1 = harmonic_mean(out.precision, out.recall);
  return out;
}

std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& similarity) {
  const std::size_t rows = similarity.size();
  if (rows == 0) return {};
  const std::size_t cols = similarity.front().size();
  for (const auto& row : similarity)
    if (row.size() != cols) throw ShapeError("similarity matrix is ragged");
  if (cols == 0) return std::vector<int>(rows, -1);

  // Shortest augmenting path with potentials on a min-cost matrix with
  // n <= m; transpose when there are more rows than columns.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows, m = transposed ? rows : cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    return -(transposed ? similarity[j - 1][i - 1] : similarity[i - 1][j - 1]);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    if (transposed)
      out[j - 1] = static_cast<int>(match[j] - 1);
    else
      out[match[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

Prf ceaf_e(const Partition& gold, const Partition& pred) {
  const auto gm = membership(gold), pm = membership(pred);
  check_universe(gm, pm);
  std::vector<std::vector<double>> phi(gold.size(), std::vector<double>(pred.size(), 0.0));
  for (const auto& [m, g] : gm) phi[g][pm.at(m)] += 1.0;
  for (std::size_t g = 0; g < gold.size(); ++g)
    for (std::size_t p = 0; p < pred.size(); ++p)
      phi[g][p] = 2.0 * phi[g][p] / static_cast<double>(gold[g].size() + pred[p].size());
  const auto assignment = optimal_assignment(phi);
  double total = 0.0;
  for (std::size_t g = 0; g < assignment.size(); ++g)
    if (assignment[g] >= 0) total += phi[g][static_cast<std::size_t>(assignment[g])];
  Prf out{ratio(total, static_cast<double>(gold.size())), ratio(total, static_cast<double>(pred.size())), 0.0};
  out.f1 = harmonic_mean(out.precision, out.recall);
  return out;
}

double conll_f1(double muc_f1, double b_cubed_f1, double ceaf_e_f1) { return (muc_f1 + b_cubed_f1 + ceaf_e_f1) / 3.0; }

ClusterScoreReport score(const Partition& gold, const Partition& pred) {
  ClusterScoreReport r;
  r.muc = muc(gold, pred);
  r.b_cubed = b_cubed(gold, pred);
  r.ceaf_e = ceaf_e(gold, pred);
  r.conll_f1 = conll_f1(r.muc.f1, r.b_cubed.f1, r.ceaf_e.f1);
  return r;
}

Partition gold_partition(const Corpus& corpus) {
  std::map<std::string, std::vector<MentionRef>> clusters;
  Partition out;
  for (const auto& [m, role] : corpus.gold.labels) {
    if (role == Role::Neither) continue;
    if (auto c = corpus.gold.cluster_of(m))
      clusters[*c].push_back(m);
    else
      out.push_back({m});
  }
  for (auto& [label, members] : clusters) out.push_back(std::move(members));
  return out;
}

std::string report_json(const ClusterScoreReport& r) {
  auto prf = [](const Prf& p) {
    nlohmann::ordered_json j;
    j["recall"] = p.recall;
    j["precision"] = p.precision;
    j["f1"] = p.f1;
    return j;
  };
  nlohmann::ordered_json j;
  j["muc"] = prf(r.muc);
  j["b_cubed"] = prf(r.b_cubed);
  j["ceaf_e"] = prf(r.ceaf_e);
  j["conll_f1"] = r.conll_f1;
  return j.dump(2) + "\n";
}

std::string report_table(const std::vector<std::pair<std::string, ClusterScoreReport>>& rows) {
  std::size_t name_w = 6;
  for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-20s  %-20s  %-20s  %s\n", static_cast<int>(name_w), "", "        MUC",
                "        B3", "       CEAFe", "CoNLL");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s  %6s %6s %6s  %6s %6s %6s  %6s %6s %6s  %6s\n", static_cast<int>(name_w),
                "System", "R", "P", "F1", "R", "P", "F1", "R", "P", "F1", "F1");
  out << buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %6.1f %6.1f %6.1f  %6.1f %6.1f %6.1f  %6.1f %6.1f %6.1f  %6.1f\n",
                  static_cast<int>(name_w), name.c_str(), 100 * r.muc.recall, 100 * r.muc.precision, 100 * r.muc.f1,
                  100 * r.b_cubed.recall, 100 * r.b_cubed.precision, 100 * r.b_cubed.f1, 100 * r.ceaf_e.recall,
                  100 * r.ceaf_e.precision, 100 * r.ceaf_e.f1, 100 * r.conll_f1);
    out << buf;
  }
  return out.str();
}

}  // namespace delichain
