#include "pclnet/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "pclnet/error.hpp"
#include "pclnet/parallel.hpp"

namespace pclnet {

double affinity(const PreparedCoherency& tp, const PreparedCoherency& tq, double gamma) {
  require(gamma > 0, "gamma must be > 0");
  const double d = revised_wishart_distance(tp, tq);
  // Far pairs would underflow to 0; the kernel stays strictly positive.
  return std::max(std::exp(-(d * d) / (2.0 * gamma * gamma)), std::numeric_limits<double>::min());
}

double affinity(const CoherencyMatrix& tp, const CoherencyMatrix& tq, double gamma) {
  require(gamma > 0, "gamma must be > 0");
  return affinity(prepare(tp), prepare(tq), gamma);
}

namespace {

AffinityGraph build_graph(std::span<const PreparedCoherency> nodes,
                          std::vector<std::size_t> node_ids, double gamma) {
  require(gamma > 0, "gamma must be > 0");
  AffinityGraph g;
  g.node_ids = std::move(node_ids);
  const std::size_t n = g.node_ids.size();
  g.weights.assign(n * n, 1.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      const double a = affinity(nodes[p], nodes[q], gamma);
      g.weights[p * n + q] = a;
      g.weights[q * n + p] = a;
    }
  }
  return g;
}

}  // namespace

AffinityGraph build_affinity_graph(std::span<const CoherencyMatrix> samples,
                                   std::span<const std::size_t> node_ids, double gamma) {
  require(samples.size() == node_ids.size(), "one node id per sample is required");
  std::vector<PreparedCoherency> nodes;
  nodes.reserve(samples.size());
  for (const auto& s : samples) nodes.push_back(prepare(s));
  return build_graph(nodes, {node_ids.begin(), node_ids.end()}, gamma);
}

PruneResult prune_cluster(const AffinityGraph& graph, std::size_t keep, Rng& rng) {
  require(keep >= 1, "retained sample count must be >= 1");
  const std::size_t n = graph.size();
  PruneResult result;
  std::vector<char> alive(n, 1);

  // Best partner of every live row: maximal weight, ties -> smallest column.
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> row_value(n, kNone);
  std::vector<std::size_t> row_best(n, n);
  auto rescan = [&](std::size_t p) {
    row_value[p] = kNone;
    row_best[p] = n;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p || !alive[q]) continue;
      const double w = graph.at(p, q);
      if (w > row_value[p]) {
        row_value[p] = w;
        row_best[p] = q;
      }
    }
  };

  std::size_t remaining = n;
  if (remaining > keep)
    for (std::size_t p = 0; p < n; ++p) rescan(p);

  while (remaining > keep) {
    // The smallest node touching a maximal edge is that edge's lower endpoint,
    // so the first row holding the global maximum gives the lexicographically
    // smallest (p, q).
    std::size_t p = n;
    for (std::size_t r = 0; r < n; ++r)
      if (alive[r] && (p == n || row_value[r] > row_value[p])) p = r;
    const std::size_t q = row_best[p];

    PruneStep step{p, q, row_value[p], fair_coin(rng) ? q : p};
    alive[step.removed] = 0;
    --remaining;
    result.audit.push_back(step);
    for (std::size_t r = 0; r < n; ++r)
      if (alive[r] && row_best[r] == step.removed) rescan(r);
  }

  for (std::size_t p = 0; p < n; ++p)
    if (alive[p]) result.retained.push_back(graph.node_ids[p]);
  std::sort(result.retained.begin(), result.retained.end());
  return result;
}

CandidateSet sample_candidates(const PolSARScene& scene, int stride, int patch_size) {
  require(stride >= 1, "candidate stride must be >= 1");
  CandidateSet set;
  for (int r = 0; r < scene.height(); r += stride)
    for (int c = 0; c < scene.width(); c += stride) set.positions.push_back({r, c});
  set.representatives.resize(set.positions.size());
  parallel_chunks(set.positions.size(), 128, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      set.representatives[i] =
          patch_mean_coherency(scene, set.positions[i].row, set.positions[i].col, patch_size);
  });
  return set;
}

PretrainDataset collect_dataset(const PolSARScene& scene, const CandidateSet& candidates,
                                const ClusterModel& clusters, const CollectOptions& options) {
  require(options.samples_per_cluster >= 1, "samples_per_cluster must be >= 1");
  require(options.gamma > 0, "gamma must be > 0");
  require(clusters.assignments.size() == candidates.positions.size(),
          "cluster model does not match the candidate set");

  const auto members = clusters.members();
  std::vector<std::vector<std::size_t>> retained(members.size());
  parallel_chunks(members.size(), 1, [&](std::size_t c, std::size_t, std::size_t) {
    const auto& ids = members[c];
    if (ids.size() <= static_cast<std::size_t>(options.samples_per_cluster)) {
      retained[c] = ids;
      return;
    }
    std::vector<PreparedCoherency> nodes;
    nodes.reserve(ids.size());
    for (auto id : ids) nodes.push_back(prepare(candidates.representatives[id]));
    const AffinityGraph graph = build_graph(nodes, ids, options.gamma);
    Rng rng = substream(options.seed, "collect.prune", c);
    retained[c] =
        prune_cluster(graph, static_cast<std::size_t>(options.samples_per_cluster), rng).retained;
  });

  PretrainDataset dataset;
  dataset.samples_per_cluster = options.samples_per_cluster;
  dataset.patch_size = options.patch_size;
  for (std::size_t c = 0; c < retained.size(); ++c) {
    for (auto id : retained[c]) {
      const auto& pos = candidates.positions[id];
      dataset.provenance.push_back({pos.row, pos.col, static_cast<int>(c)});
    }
  }
  dataset.samples.resize(dataset.provenance.size());
  parallel_chunks(dataset.samples.size(), 64, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      dataset.samples[i] = extract_patch(scene, dataset.provenance[i].row,
                                         dataset.provenance[i].col, options.patch_size);
  });
  return dataset;
}

void write_manifest_csv(std::ostream& out, const PretrainDataset& dataset) {
  out << "sample_id,row,col,cluster_id\n";
  for (std::size_t i = 0; i < dataset.provenance.size(); ++i) {
    const auto& p = dataset.provenance[i];
    out << i << ',' << p.row << ',' << p.col << ',' << p.cluster << '\n';
  }
}

}  // namespace pclnet
