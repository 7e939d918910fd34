#pragma once

#include <vector>

#include "pclnet/scene.hpp"

namespace pclnet {

/// channels x height x width real tensor, channel-major.
class PatchTensor {
 public:
  PatchTensor() = default;
  PatchTensor(int channels, int height, int width);
  PatchTensor(int channels, int height, int width, std::vector<double> values);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double& at(int c, int i, int j) { return values_[index(c, i, j)]; }
  double at(int c, int i, int j) const { return values_[index(c, i, j)]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  friend bool operator==(const PatchTensor&, const PatchTensor&) = default;

 private:
  std::size_t index(int c, int i, int j) const {
    return (static_cast<std::size_t>(c) * height_ + i) * width_ + j;
  }
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Reflects an out-of-range index back into [0, n) without repeating the
/// edge sample (-1 -> 1, n -> n-2).
int mirror_index(int i, int n);

/// size x size window of pixel features centred on (row, col), mirror-padded.
PatchTensor extract_patch(const PolSARScene& scene, int row, int col, int size);

/// Reverses both spatial axes of every channel.
PatchTensor rotate180(const PatchTensor& patch);

/// Boxcar mean of the coherency matrices in the same window extract_patch
/// reads.
CoherencyMatrix patch_mean_coherency(const PolSARScene& scene, int row, int col, int size);

/// (x - mean) / stddev per channel, in place.
void standardize(PatchTensor& patch, const ChannelStats& stats);

}  // namespace pclnet
