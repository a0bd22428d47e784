#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dvsgait/losses.hpp"

namespace dvsgait {

// Retrieval metrics in percent. A probe whose identity is absent from the
// gallery is excluded from the averages and reported by sample id.
struct EvalResult {
  double rank1 = 0.0;
  double map = 0.0;
  double minp = 0.0;
  std::vector<double> per_query_ap;
  std::vector<std::string> excluded_probes;
  std::size_t evaluated = 0;
};

// Euclidean nearest-neighbour retrieval. Ties in distance break by gallery
// sample id so runs are reproducible. A gallery entry sharing the probe's
// sample id (self match) is skipped.
inline EvalResult evaluate(const std::vector<GaitEmbedding>& gallery,
                           const std::vector<GaitEmbedding>& probes) {
  if (gallery.empty()) throw Error(ErrorKind::invalid_argument, "evaluate: empty gallery");
  EvalResult res;
  double rank1_hits = 0.0, ap_sum = 0.0, inp_sum = 0.0;

  struct Entry {
    double dist;
    const GaitEmbedding* g;
  };

  for (const GaitEmbedding& probe : probes) {
    std::vector<Entry> ranked;
    ranked.reserve(gallery.size());
    std::size_t positives = 0;
    for (const GaitEmbedding& g : gallery) {
      if (g.sample_id == probe.sample_id) continue;
      ranked.push_back({euclidean(probe.f_gait, g.f_gait), &g});
      if (g.label == probe.label) ++positives;
    }
    if (positives == 0) {
      res.excluded_probes.push_back(probe.sample_id);
      continue;
    }
    std::sort(ranked.begin(), ranked.end(), [](const Entry& a, const Entry& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      return a.g->sample_id < b.g->sample_id;
    });

    ++res.evaluated;
    if (ranked.front().g->label == probe.label) rank1_hits += 1.0;

    double ap = 0.0;
    std::size_t hits = 0, hardest_rank = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (ranked[r].g->label == probe.label) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        hardest_rank = r + 1;
      }
    }
    ap /= static_cast<double>(positives);
    res.per_query_ap.push_back(ap);
    ap_sum += ap;
    inp_sum += static_cast<double>(positives) / static_cast<double>(hardest_rank);
  }

  if (res.evaluated > 0) {
    const double n = static_cast<double>(res.evaluated);
    res.rank1 = 100.0 * rank1_hits / n;
    res.map = 100.0 * ap_sum / n;
    res.minp = 100.0 * inp_sum / n;
  }
  return res;
}

}  // namespace dvsgait
