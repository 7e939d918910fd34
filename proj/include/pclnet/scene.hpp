#pragma once

#include <cstdint>
#include <vector>

#include "pclnet/coherency.hpp"
#include "pclnet/rng.hpp"

namespace pclnet {

/// H x W grid of coherency matrices, row-major.
class PolSARScene {
 public:
  PolSARScene() = default;
  PolSARScene(int height, int width, std::vector<CoherencyMatrix> pixels);
  PolSARScene(int height, int width, const CoherencyMatrix& fill);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  const CoherencyMatrix& at(int row, int col) const {
    return pixels_[static_cast<std::size_t>(row) * width_ + col];
  }
  CoherencyMatrix& at(int row, int col) {
    return pixels_[static_cast<std::size_t>(row) * width_ + col];
  }
  const std::vector<CoherencyMatrix>& pixels() const { return pixels_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<CoherencyMatrix> pixels_;
};

/// 0 = unlabeled, 1..num_classes = classes.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, int num_classes);
  LabelMap(int height, int width, int num_classes, std::vector<std::int32_t> labels);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  std::int32_t at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }
  void set(int row, int col, std::int32_t label);
  const std::vector<std::int32_t>& labels() const { return labels_; }
  std::vector<std::size_t> histogram() const;  // index 0 = unlabeled

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<std::int32_t> labels_;
};

struct Region {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
  int label = 1;
};

struct SyntheticSceneSpec {
  int height = 0;
  int width = 0;
  int looks = 8;
  std::vector<CoherencyMatrix> class_covariances;  // label c uses entry c-1
  std::vector<Region> regions;
  std::uint64_t seed = 0;

  /// num_classes equal-width vertical bands; the last band absorbs the
  /// remainder.
  static std::vector<Region> vertical_bands(int height, int width, int num_classes);
};

/// Three distinct scattering classes used by the demos and the end-to-end
/// tests (surface-like, double-bounce-like, volume-like).
std::vector<CoherencyMatrix> default_class_covariances(int num_classes);

/// T = (1/n) sum k_i k_i^H with k_i ~ CN(0, sigma).
CoherencyMatrix sample_wishart(const CoherencyMatrix& sigma, int looks, Rng& rng);

struct SyntheticScene {
  PolSARScene scene;
  LabelMap labels;
};

SyntheticScene synth_scene(const SyntheticSceneSpec& spec);

/// Per-channel mean and standard deviation of the pixel features over a scene.
struct ChannelStats {
  std::array<double, kPolChannels> mean{};
  std::array<double, kPolChannels> stddev{};

  static ChannelStats identity();
  static ChannelStats of_scene(const PolSARScene& scene);
};

}  // namespace pclnet
