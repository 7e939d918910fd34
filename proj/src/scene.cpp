#include "pclnet/scene.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "pclnet/error.hpp"
#include "pclnet/parallel.hpp"

namespace pclnet {

PolSARScene::PolSARScene(int height, int width, std::vector<CoherencyMatrix> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  require(height >= 0 && width >= 0, "scene dimensions must be nonnegative");
  require(pixels_.size() == static_cast<std::size_t>(height) * width,
          "scene pixel count does not match height x width");
}

PolSARScene::PolSARScene(int height, int width, const CoherencyMatrix& fill)
    : PolSARScene(height, width,
                  std::vector<CoherencyMatrix>(static_cast<std::size_t>(height) * width, fill)) {}

LabelMap::LabelMap(int height, int width, int num_classes)
    : LabelMap(height, width, num_classes,
               std::vector<std::int32_t>(static_cast<std::size_t>(height) * width, 0)) {}

LabelMap::LabelMap(int height, int width, int num_classes, std::vector<std::int32_t> labels)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
  require(height >= 0 && width >= 0 && num_classes >= 0, "invalid label map shape");
  require(labels_.size() == static_cast<std::size_t>(height) * width,
          "label count does not match height x width");
  for (auto l : labels_)
    require(l >= 0 && l <= num_classes, "label out of range 0.." + std::to_string(num_classes));
}

void LabelMap::set(int row, int col, std::int32_t label) {
  require(label >= 0 && label <= num_classes_, "label out of range");
  labels_[static_cast<std::size_t>(row) * width_ + col] = label;
}

std::vector<std::size_t> LabelMap::histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(num_classes_) + 1, 0);
  for (auto l : labels_) ++h[static_cast<std::size_t>(l)];
  return h;
}

std::vector<Region> SyntheticSceneSpec::vertical_bands(int height, int width, int num_classes) {
  require(num_classes >= 1 && width >= num_classes, "cannot split width into bands");
  std::vector<Region> regions;
  const int band = width / num_classes;
  for (int c = 0; c < num_classes; ++c) {
    const int col = c * band;
    const int cols = (c == num_classes - 1) ? width - col : band;
    regions.push_back({0, col, height, cols, c + 1});
  }
  return regions;
}

std::vector<CoherencyMatrix> default_class_covariances(int num_classes) {
  // Comparable total power and overlapping single-pixel statistics; the
  // first three differ mainly in the balance of the diagonal.
  static const std::vector<CoherencyMatrix> presets = {
      CoherencyMatrix({0.755, 0.363, 0.132, 0.095, 0.050, 0.011, 0.005, 0.010, 0.000}),
      CoherencyMatrix({0.590, 0.513, 0.147, 0.005, 0.065, 0.005, 0.011, 0.013, 0.000}),
      CoherencyMatrix({0.605, 0.423, 0.222, 0.050, 0.035, 0.005, 0.005, 0.007, 0.000}),
      CoherencyMatrix({0.30, 0.10, 0.05, 0.05, -0.02, 0.00, 0.00, 0.00, 0.00}),
      CoherencyMatrix({1.60, 0.90, 0.60, 0.30, 0.20, 0.00, 0.05, 0.05, 0.00}),
      CoherencyMatrix({0.20, 0.60, 0.50, 0.00, 0.00, 0.00, 0.00, 0.10, 0.05}),
  };
  require(num_classes >= 1, "num_classes must be >= 1");
  std::vector<CoherencyMatrix> out;
  for (int c = 0; c < num_classes; ++c) {
    CoherencyMatrix m = presets[static_cast<std::size_t>(c) % presets.size()];
    // Scale repeats so every class stays distinct.
    m *= 1.0 + 0.5 * static_cast<double>(static_cast<std::size_t>(c) / presets.size());
    out.push_back(m);
  }
  return out;
}

CoherencyMatrix sample_wishart(const CoherencyMatrix& sigma, int looks, Rng& rng) {
  require(looks >= 1, "looks must be >= 1");
  if (!validate_coherency(sigma).valid) fail(ErrorKind::invalid_argument, "covariance not PSD");

  Eigen::SelfAdjointEigenSolver<Matrix3c> eig(sigma.matrix());
  const Eigen::Vector3d root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix3c factor = eig.eigenvectors() * root.cast<Complex>().asDiagonal();

  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix3c sum = Matrix3c::Zero();
  for (int i = 0; i < looks; ++i) {
    Eigen::Vector3cd z;
    for (int j = 0; j < 3; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(j) = Complex(re, im);
    }
    const Eigen::Vector3cd k = factor * z;
    sum.noalias() += k * k.adjoint();
  }
  return CoherencyMatrix::from_matrix(sum / static_cast<double>(looks));
}

SyntheticScene synth_scene(const SyntheticSceneSpec& spec) {
  require(spec.height >= 1 && spec.width >= 1, "scene must be at least 1x1");
  require(spec.looks >= 1, "looks must be >= 1");
  const int classes = static_cast<int>(spec.class_covariances.size());
  require(classes >= 1, "at least one class covariance is required");
  for (const auto& sigma : spec.class_covariances)
    if (!validate_coherency(sigma).valid) fail(ErrorKind::invalid_argument, "covariance not PSD");

  LabelMap labels(spec.height, spec.width, classes);
  std::vector<char> covered(static_cast<std::size_t>(spec.height) * spec.width, 0);
  for (const Region& r : spec.regions) {
    require(r.label >= 1 && r.label <= classes, "region label out of range");
    require(r.rows >= 1 && r.cols >= 1 && r.row >= 0 && r.col >= 0 &&
                r.row + r.rows <= spec.height && r.col + r.cols <= spec.width,
            "region outside the scene");
    for (int i = r.row; i < r.row + r.rows; ++i) {
      for (int j = r.col; j < r.col + r.cols; ++j) {
        char& c = covered[static_cast<std::size_t>(i) * spec.width + j];
        require(!c, "regions overlap at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        c = 1;
        labels.set(i, j, r.label);
      }
    }
  }
  for (char c : covered) require(c, "regions do not tile the scene");

  std::vector<CoherencyMatrix> pixels(covered.size());
  parallel_chunks(pixels.size(), 256, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng = substream(spec.seed, "synth.pixel", p);
      const auto& sigma = spec.class_covariances[static_cast<std::size_t>(labels.labels()[p] - 1)];
      pixels[p] = sample_wishart(sigma, spec.looks, rng);
    }
  });
  return {PolSARScene(spec.height, spec.width, std::move(pixels)), std::move(labels)};
}

ChannelStats ChannelStats::identity() {
  ChannelStats s;
  s.stddev.fill(1.0);
  return s;
}

ChannelStats ChannelStats::of_scene(const PolSARScene& scene) {
  require(scene.size() > 0, "cannot compute statistics of an empty scene");
  ChannelStats s;
  const double n = static_cast<double>(scene.size());
  for (const auto& t : scene.pixels())
    for (int c = 0; c < kPolChannels; ++c) s.mean[c] += t[c];
  for (auto& m : s.mean) m /= n;
  for (const auto& t : scene.pixels())
    for (int c = 0; c < kPolChannels; ++c) s.stddev[c] += (t[c] - s.mean[c]) * (t[c] - s.mean[c]);
  for (auto& v : s.stddev) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

}  // namespace pclnet
