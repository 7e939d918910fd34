#include "pclnet/wishart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "pclnet/error.hpp"
#include "pclnet/parallel.hpp"
#include "pclnet/rng.hpp"

namespace pclnet {

namespace {
// tr(A B) for Hermitian A, B.
double trace_product(const Matrix3c& a, const Matrix3c& b) {
  return (a.cwiseProduct(b.transpose())).sum().real();
}

std::vector<PreparedCoherency> prepare_all(std::span<const CoherencyMatrix> ms) {
  std::vector<PreparedCoherency> out(ms.size());
  parallel_chunks(ms.size(), 512, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = prepare(ms[i]);
  });
  return out;
}
}  // namespace

double revised_wishart_distance(const PreparedCoherency& t, const PreparedCoherency& v) {
  const double d = 0.5 * (trace_product(t.m, v.inv) + trace_product(v.m, t.inv)) - 3.0;
  if (!std::isfinite(d)) fail(ErrorKind::numeric, "distance overflow");
  return d;
}

double revised_wishart_distance(const CoherencyMatrix& t, const CoherencyMatrix& v) {
  return revised_wishart_distance(prepare(t), prepare(v));
}

std::size_t assign_cluster(const PreparedCoherency& t,
                           std::span<const PreparedCoherency> prototypes) {
  require(!prototypes.empty(), "assign_cluster needs at least one prototype");
  std::size_t best = 0;
  double best_d = revised_wishart_distance(t, prototypes[0]);
  for (std::size_t i = 1; i < prototypes.size(); ++i) {
    const double d = revised_wishart_distance(t, prototypes[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t assign_cluster(const CoherencyMatrix& t, std::span<const CoherencyMatrix> prototypes) {
  require(!prototypes.empty(), "assign_cluster needs at least one prototype");
  const auto prepared = prepare_all(prototypes);
  return assign_cluster(prepare(t), prepared);
}

std::vector<std::vector<std::size_t>> ClusterModel::members() const {
  std::vector<std::vector<std::size_t>> m(static_cast<std::size_t>(num_clusters));
  for (std::size_t i = 0; i < assignments.size(); ++i) m[assignments[i]].push_back(i);
  return m;
}

namespace {

std::vector<CoherencyMatrix> update_prepared(std::span<const CoherencyMatrix> samples,
                                             std::span<const PreparedCoherency> prepared,
                                             std::span<const std::uint32_t> assignments,
                                             std::span<const CoherencyMatrix> current,
                                             int num_clusters) {
  require(samples.size() == assignments.size(), "one assignment per sample is required");
  require(current.size() == static_cast<std::size_t>(num_clusters),
          "one current prototype per cluster is required");
  const auto k = static_cast<std::size_t>(num_clusters);
  std::vector<CoherencyMatrix> sums(k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(assignments[i] < k, "assignment index out of range");
    sums[assignments[i]] += samples[i];
    ++counts[assignments[i]];
  }

  std::vector<CoherencyMatrix> next(k);
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
    } else {
      next[c] = (1.0 / static_cast<double>(counts[c])) * sums[c];
    }
  }
  if (empty.empty()) return next;

  // Distance of every sample to the prototype it is currently assigned to.
  const auto prepared_current = prepare_all(current);
  std::vector<double> dist(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    dist[i] = revised_wishart_distance(prepared[i], prepared_current[assignments[i]]);
  std::vector<char> used(samples.size(), 0);
  for (std::size_t c : empty) {
    std::size_t far = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (used[i]) continue;
      if (far == samples.size() || dist[i] > dist[far]) far = i;
    }
    if (far == samples.size()) fail(ErrorKind::state, "no sample left to re-seed an empty cluster");
    used[far] = 1;
    next[c] = samples[far];
  }
  return next;
}

void assign_all(std::span<const PreparedCoherency> samples,
                std::span<const PreparedCoherency> prototypes,
                std::vector<std::uint32_t>& assignments, std::vector<double>& distances) {
  parallel_chunks(samples.size(), 256, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto a = assign_cluster(samples[i], prototypes);
      assignments[i] = static_cast<std::uint32_t>(a);
      distances[i] = revised_wishart_distance(samples[i], prototypes[a]);
    }
  });
}

}  // namespace

std::vector<CoherencyMatrix> update_prototypes(std::span<const CoherencyMatrix> samples,
                                               std::span<const std::uint32_t> assignments,
                                               std::span<const CoherencyMatrix> current,
                                               int num_clusters) {
  const auto prepared = prepare_all(samples);
  return update_prepared(samples, prepared, assignments, current, num_clusters);
}

ClusterModel wishart_cluster(std::span<const CoherencyMatrix> samples, int num_clusters,
                             int max_iter, std::uint64_t seed) {
  require(num_clusters >= 1, "number of clusters must be >= 1");
  require(max_iter >= 1, "max_iter must be >= 1");
  if (static_cast<std::size_t>(num_clusters) > samples.size())
    fail(ErrorKind::invalid_argument, "number of clusters (" + std::to_string(num_clusters) +
                                          ") exceeds sample count (" +
                                          std::to_string(samples.size()) + ")");
  const auto k = static_cast<std::size_t>(num_clusters);
  const auto prepared = prepare_all(samples);

  // Partial Fisher-Yates: K distinct indices.
  Rng rng = substream(seed, "cluster.init");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);

  ClusterModel model;
  model.num_clusters = num_clusters;
  for (std::size_t i = 0; i < k; ++i) model.prototypes.push_back(samples[order[i]]);
  model.assignments.assign(samples.size(), 0);
  model.distances.assign(samples.size(), 0.0);

  std::vector<std::uint32_t> previous;
  bool stable = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto protos = prepare_all(model.prototypes);
    assign_all(prepared, protos, model.assignments, model.distances);
    if (iter > 0 && model.assignments == previous) {
      stable = true;
      break;
    }
    previous = model.assignments;
    model.prototypes = update_prepared(samples, prepared, model.assignments, model.prototypes,
                                       num_clusters);
    ++model.iterations_run;
  }

  // The returned assignments must be the argmin against the returned
  // prototypes, and every cluster must keep at least one member.
  for (std::size_t repair = 0;; ++repair) {
    if (!stable || repair > 0) {
      const auto protos = prepare_all(model.prototypes);
      assign_all(prepared, protos, model.assignments, model.distances);
    }
    std::vector<std::size_t> counts(k, 0);
    for (auto a : model.assignments) ++counts[a];
    if (std::find(counts.begin(), counts.end(), 0) == counts.end()) break;
    if (repair >= k)
      fail(ErrorKind::state, "cannot form " + std::to_string(k) +
                                 " non-empty clusters from the given samples");
    // Re-seed only the empty clusters; occupied prototypes are kept.
    auto reseeded = update_prepared(samples, prepared, model.assignments, model.prototypes,
                                    num_clusters);
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] == 0) model.prototypes[c] = reseeded[c];
  }
  return model;
}

void write_cluster_csv(std::ostream& out, const ClusterModel& model) {
  out << "sample_index,cluster_index,distance_to_prototype\n";
  char buf[64];
  for (std::size_t i = 0; i < model.assignments.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", model.distances[i]);
    out << i << ',' << model.assignments[i] << ',' << buf << '\n';
  }
}

}  // namespace pclnet
