#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "pclnet/error.hpp"
#include "pclnet/scene.hpp"
#include "pclnet/wishart.hpp"

using namespace pclnet;

namespace {

std::vector<CoherencyMatrix> random_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<CoherencyMatrix> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(oracle::random_psd(gen));
  return out;
}

void check_assignment_optimal(const std::vector<CoherencyMatrix>& samples, const ClusterModel& m) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double own = revised_wishart_distance(samples[i], m.prototypes[m.assignments[i]]);
    CHECK(m.distances[i] == own);
    for (std::size_t k = 0; k < m.prototypes.size(); ++k) {
      const double other = revised_wishart_distance(samples[i], m.prototypes[k]);
      CHECK(own <= other);
      if (other == own) CHECK(m.assignments[i] <= k);
    }
  }
}

}  // namespace

TEST_SUITE("wishart-cluster") {

TEST_CASE("distance to itself is zero") {
  for (const auto& t : random_samples(200, 1)) CHECK(std::abs(revised_wishart_distance(t, t)) <= 1e-10);
}

TEST_CASE("diagonal closed form") {
  CHECK(revised_wishart_distance(CoherencyMatrix::diagonal(2, 1, 1), CoherencyMatrix::identity()) ==
        doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("distance agrees with the cofactor oracle, is symmetric and nonnegative") {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 500; ++i) {
    const auto a = oracle::random_psd(gen), b = oracle::random_psd(gen);
    const double d = revised_wishart_distance(CoherencyMatrix(a), CoherencyMatrix(b));
    const double scale = std::max(1.0, std::abs(d));
    CHECK(std::abs(d - oracle::revised_wishart(a, b)) / scale <= 1e-10);
    CHECK(std::abs(d - revised_wishart_distance(CoherencyMatrix(b), CoherencyMatrix(a))) / scale <= 1e-12);
    CHECK(d >= -1e-10);
  }
}

TEST_CASE("singular matrices are guarded before inversion") {
  Rng rng(3);
  // Single-look samples are rank one.
  const CoherencyMatrix t = sample_wishart(CoherencyMatrix::identity(), 1, rng);
  const double d = revised_wishart_distance(t, CoherencyMatrix::identity());
  CHECK(std::isfinite(d));
  // The guarded matrix has condition number ~1e6.
  CHECK(std::abs(revised_wishart_distance(t, t)) <= 1e-8);
  const Matrix3c g = guard_singular(t.matrix());
  CHECK((g - t.matrix()).norm() == doctest::Approx(kSingularGuardEps * t.trace() / 3 * std::sqrt(3.0)));
  // Well-conditioned input is left alone.
  CHECK(guard_singular(Matrix3c::Identity()) == Matrix3c::Identity());
}

TEST_CASE("assign_cluster") {
  const CoherencyMatrix t({1.2, 0.8, 0.4, 0.1, 0.05, 0, 0, 0.02, 0});
  const std::vector<CoherencyMatrix> protos{t, 5.0 * t};
  CHECK(assign_cluster(t, protos) == 0);
  CHECK(assign_cluster(t, std::vector<CoherencyMatrix>{5.0 * t}) == 0);
  // Equal distances go to the lowest index.
  CHECK(assign_cluster(t, std::vector<CoherencyMatrix>{5.0 * t, 5.0 * t}) == 0);

  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CoherencyMatrix> p;
    for (int k = 0; k < 4; ++k) p.emplace_back(oracle::random_psd(gen));
    const CoherencyMatrix q(oracle::random_psd(gen));
    std::size_t best = 0;
    for (std::size_t k = 1; k < 4; ++k)
      if (oracle::revised_wishart(q.stored(), p[k].stored()) <
          oracle::revised_wishart(q.stored(), p[best].stored()))
        best = k;
    CHECK(assign_cluster(q, p) == best);
  }
}

TEST_CASE("update_prototypes is the arithmetic mean") {
  const double e = 1e-3;
  const std::vector<CoherencyMatrix> two{CoherencyMatrix::diagonal(2 + e, e, e),
                                         CoherencyMatrix::diagonal(e, 2 + e, e)};
  const std::vector<std::uint32_t> same{0, 0};
  const auto p = update_prototypes(two, same, std::vector<CoherencyMatrix>{two[0]}, 1);
  CHECK(p[0][0] == doctest::Approx(1 + e));
  CHECK(p[0][1] == doctest::Approx(1 + e));
  CHECK(p[0][2] == doctest::Approx(e));

  const CoherencyMatrix t({1, 2, 3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3});
  const std::vector<CoherencyMatrix> ident(5, t);
  const auto q = update_prototypes(ident, std::vector<std::uint32_t>(5, 0), std::vector<CoherencyMatrix>{ident[0]}, 1);
  for (std::size_t k = 0; k < 9; ++k) CHECK(q[0][k] == doctest::Approx(t[k]).epsilon(1e-15));

  const auto samples = random_samples(40, 4);
  std::vector<std::uint32_t> asg(40);
  for (std::size_t i = 0; i < 40; ++i) asg[i] = static_cast<std::uint32_t>(i % 3);
  for (const auto& proto : update_prototypes(samples, asg, {samples.begin(), samples.begin() + 3}, 3))
    CHECK(validate_coherency(proto).valid);
}

TEST_CASE("update_prototypes re-seeds an empty cluster with the sample farthest from its own prototype") {
  const auto samples = random_samples(10, 8);
  const std::vector<std::uint32_t> asg(10, 0);
  const std::vector<CoherencyMatrix> current{samples[0], samples[1]};
  const auto p = update_prototypes(samples, asg, current, 2);
  std::size_t far = 0;
  for (std::size_t i = 1; i < 10; ++i)
    if (revised_wishart_distance(samples[i], current[0]) > revised_wishart_distance(samples[far], current[0]))
      far = i;
  CHECK(p[1] == samples[far]);
}

TEST_CASE("K = 1 gives the global mean") {
  const auto samples = random_samples(30, 9);
  const ClusterModel m = wishart_cluster(samples, 1, 50, 1);
  CHECK(m.num_clusters == 1);
  for (auto a : m.assignments) CHECK(a == 0);
  CoherencyMatrix mean;
  for (const auto& s : samples) mean += s;
  mean *= 1.0 / 30;
  for (std::size_t k = 0; k < 9; ++k) CHECK(m.prototypes[0][k] == doctest::Approx(mean[k]).epsilon(1e-12));
}

TEST_CASE("two Wishart populations are recovered") {
  Rng rng(11);
  std::vector<CoherencyMatrix> samples;
  std::vector<int> truth;
  for (int i = 0; i < 400; ++i) {
    const bool second = i >= 200;
    samples.push_back(sample_wishart(second ? CoherencyMatrix::diagonal(10, 1, 1) : CoherencyMatrix::identity(), 16, rng));
    truth.push_back(second);
  }
  const ClusterModel m = wishart_cluster(samples, 2, 50, 3);
  std::vector<int> found(m.assignments.begin(), m.assignments.end());
  CHECK(oracle::permutation_agreement(truth, found, 2) >= 0.95);
  check_assignment_optimal(samples, m);
}

TEST_CASE("clustering postconditions over random inputs") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto samples = random_samples(60 + seed * 7, 100 + seed);
    const int k = 2 + static_cast<int>(seed);
    const int max_iter = seed % 2 ? 3 : 50;
    const ClusterModel m = wishart_cluster(samples, k, max_iter, seed);
    CHECK(m.iterations_run <= max_iter);
    CHECK(m.prototypes.size() == static_cast<std::size_t>(k));
    for (const auto& members : m.members()) CHECK_FALSE(members.empty());
    for (auto a : m.assignments) CHECK(a < static_cast<std::uint32_t>(k));
    for (const auto& p : m.prototypes) {
      CHECK(validate_coherency(p).valid);
      CHECK_NOTHROW(prepare(p));
    }
    check_assignment_optimal(samples, m);
    CHECK(wishart_cluster(samples, k, max_iter, seed) == m);
  }
}

TEST_CASE("overcomplete K keeps every cluster populated") {
  auto samples = random_samples(12, 44);
  samples.insert(samples.end(), 8, samples[0]);
  const ClusterModel m = wishart_cluster(samples, 12, 50, 2);
  for (const auto& members : m.members()) CHECK_FALSE(members.empty());
}

TEST_CASE("wishart_cluster argument checks") {
  const auto samples = random_samples(5, 1);
  CHECK_THROWS_AS(wishart_cluster(samples, 0, 10, 1), Error);
  CHECK_THROWS_AS(wishart_cluster(samples, 6, 10, 1), Error);
  CHECK_THROWS_AS(wishart_cluster(samples, 2, 0, 1), Error);
}

TEST_CASE("cluster CSV") {
  const auto samples = random_samples(4, 2);
  const ClusterModel m = wishart_cluster(samples, 2, 10, 5);
  std::ostringstream os;
  write_cluster_csv(os, m);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample_index,cluster_index,distance_to_prototype");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string a, b, c;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    std::getline(ls, c, ',');
    CHECK(std::stoi(a) == rows);
    CHECK(static_cast<std::uint32_t>(std::stoi(b)) == m.assignments[static_cast<std::size_t>(rows)]);
    CHECK(std::stod(c) == m.distances[static_cast<std::size_t>(rows)]);
    ++rows;
  }
  CHECK(rows == 4);
}

}  // TEST_SUITE
