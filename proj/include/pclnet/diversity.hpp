#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pclnet/patch.hpp"
#include "pclnet/wishart.hpp"

namespace pclnet {

/// Gaussian kernel of the revised Wishart distance: exp(-d^2 / (2 gamma^2)),
/// floored at the smallest normal double so it never reaches 0.
double affinity(const CoherencyMatrix& tp, const CoherencyMatrix& tq, double gamma);
double affinity(const PreparedCoherency& tp, const PreparedCoherency& tq, double gamma);

/// Fully connected graph over one cluster. Only the upper triangle is
/// computed; the matrix is stored dense and symmetric with a unit diagonal.
struct AffinityGraph {
  std::vector<std::size_t> node_ids;
  std::vector<double> weights;  // row-major N x N

  std::size_t size() const { return node_ids.size(); }
  double at(std::size_t p, std::size_t q) const { return weights[p * size() + q]; }
};

AffinityGraph build_affinity_graph(std::span<const CoherencyMatrix> samples,
                                   std::span<const std::size_t> node_ids, double gamma);

/// One pruning step: the maximal edge (p, q) (local indices, p < q) and the
/// endpoint that was dropped.
struct PruneStep {
  std::size_t p = 0;
  std::size_t q = 0;
  double weight = 0;
  std::size_t removed = 0;
};

struct PruneResult {
  std::vector<std::size_t> retained;  // node ids, ascending
  std::vector<PruneStep> audit;
};

/// Repeatedly drops one endpoint (fair coin) of the maximal-affinity edge until
/// at most `keep` nodes remain. Ties between equal maximal edges go to the
/// lexicographically smallest (p, q).
PruneResult prune_cluster(const AffinityGraph& graph, std::size_t keep, Rng& rng);

struct Candidate {
  int row = 0;
  int col = 0;
};

/// Candidate positions on a stride grid plus their clustering representative
/// (boxcar mean over the patch window).
struct CandidateSet {
  std::vector<Candidate> positions;
  std::vector<CoherencyMatrix> representatives;
};

CandidateSet sample_candidates(const PolSARScene& scene, int stride, int patch_size);

struct Provenance {
  int row = 0;
  int col = 0;
  int cluster = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PretrainDataset {
  std::vector<PatchTensor> samples;
  std::vector<Provenance> provenance;
  int samples_per_cluster = 0;
  int patch_size = 0;

  std::size_t size() const { return samples.size(); }
};

struct CollectOptions {
  double gamma = 0.42;
  int samples_per_cluster = 600;
  int patch_size = 15;
  std::uint64_t seed = 0;
};

/// Per cluster: affinity graph over the candidate representatives, prune to
/// samples_per_cluster, and extract the anchor patches at the survivors.
/// Samples are ordered by cluster, then by candidate index.
PretrainDataset collect_dataset(const PolSARScene& scene, const CandidateSet& candidates,
                                const ClusterModel& clusters, const CollectOptions& options);

/// sample_id,row,col,cluster_id
void write_manifest_csv(std::ostream& out, const PretrainDataset& dataset);

}  // namespace pclnet
