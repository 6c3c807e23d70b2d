#pragma once

#include <string>
#include <utility>
#include <vector>

#include "delichain/clustering.hpp"
#include "delichain/corpus.hpp"

namespace delichain {

struct Prf {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct ClusterScoreReport {
  Prf muc;
  Prf b_cubed;
  Prf ceaf_e;
  double conll_f1 = 0.0;
};

// Harmonic mean; 0 when both inputs are 0.
double harmonic_mean(double p, double r);

// All metrics require gold and pred to cover the same mention set and throw
// ValidationError otherwise. Empty denominators yield 0.
Prf muc(const Partition& gold, const Partition& pred);
Prf b_cubed(const Partition& gold, const Partition& pred);
Prf ceaf_e(const Partition& gold, const Partition& pred);
double conll_f1(double muc_f1, double b_cubed_f1, double ceaf_e_f1);
ClusterScoreReport score(const Partition& gold, const Partition& pred);

// Maximum-weight one-to-one assignment between rows and columns (Hungarian
// method). Returns, for each row, the assigned column or -1.
std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& similarity);

// Gold clusters over the gold interventions of `corpus`; interventions
// without a cluster become singletons.
Partition gold_partition(const Corpus& corpus);

std::string report_json(const ClusterScoreReport& report);

// Aligned text table with one row per system: MUC, B3 and CEAFe R/P/F1 and
// CoNLL F1, as percentages.
std::string report_table(const std::vector<std::pair<std::string, ClusterScoreReport>>& rows);

}  // namespace delichain
