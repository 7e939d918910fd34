#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pclnet/coherency.hpp"

namespace pclnet {

/// Symmetric revised Wishart distance (1/2) tr(T V^-1 + V T^-1) - 3.
/// Both arguments pass through the singular-matrix guard first.
double revised_wishart_distance(const CoherencyMatrix& t, const CoherencyMatrix& v);
double revised_wishart_distance(const PreparedCoherency& t, const PreparedCoherency& v);

/// argmin of the distance over the prototypes; ties go to the lowest index.
std::size_t assign_cluster(const PreparedCoherency& t,
                           std::span<const PreparedCoherency> prototypes);
std::size_t assign_cluster(const CoherencyMatrix& t,
                           std::span<const CoherencyMatrix> prototypes);

struct ClusterModel {
  std::vector<CoherencyMatrix> prototypes;
  std::vector<std::uint32_t> assignments;
  std::vector<double> distances;  // to the assigned prototype
  int num_clusters = 0;
  int iterations_run = 0;

  std::vector<std::vector<std::size_t>> members() const;
  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Arithmetic mean per cluster. A cluster with no members is re-seeded with
/// the sample farthest from its current prototype (ties -> lowest index);
/// a sample is used for at most one re-seed.
std::vector<CoherencyMatrix> update_prototypes(std::span<const CoherencyMatrix> samples,
                                               std::span<const std::uint32_t> assignments,
                                               std::span<const CoherencyMatrix> current,
                                               int num_clusters);

/// K-prototype clustering under the revised Wishart distance. Prototypes start
/// at K distinct samples drawn from `seed`; iteration stops once assignments
/// are stable or after max_iter prototype updates.
ClusterModel wishart_cluster(std::span<const CoherencyMatrix> samples, int num_clusters,
                             int max_iter, std::uint64_t seed);

/// sample_index,cluster_index,distance_to_prototype
void write_cluster_csv(std::ostream& out, const ClusterModel& model);

}  // namespace pclnet
