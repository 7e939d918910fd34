#include "pclnet/patch.hpp"

#include <cmath>
#include <string>

#include "pclnet/error.hpp"

namespace pclnet {

PatchTensor::PatchTensor(int channels, int height, int width)
    : PatchTensor(channels, height, width,
                  std::vector<double>(static_cast<std::size_t>(channels) * height * width, 0.0)) {}

PatchTensor::PatchTensor(int channels, int height, int width, std::vector<double> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  require(channels >= 1 && height >= 1 && width >= 1, "patch dimensions must be positive");
  require(values_.size() == static_cast<std::size_t>(channels) * height * width,
          "patch value count does not match its shape");
}

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {
void check_window(const PolSARScene& scene, int row, int col, int size) {
  require(size >= 1 && size % 2 == 1, "patch size must be a positive odd integer");
  if (!scene.contains(row, col))
    fail(ErrorKind::invalid_argument, "pixel (" + std::to_string(row) + ", " +
                                          std::to_string(col) + ") is outside the scene");
}
}  // namespace

PatchTensor extract_patch(const PolSARScene& scene, int row, int col, int size) {
  check_window(scene, row, col, size);
  PatchTensor patch(kPolChannels, size, size);
  const int half = size / 2;
  for (int i = 0; i < size; ++i) {
    const int r = mirror_index(row - half + i, scene.height());
    for (int j = 0; j < size; ++j) {
      const int c = mirror_index(col - half + j, scene.width());
      const auto& t = scene.at(r, c);
      for (int ch = 0; ch < kPolChannels; ++ch) patch.at(ch, i, j) = t[ch];
    }
  }
  return patch;
}

PatchTensor rotate180(const PatchTensor& patch) {
  PatchTensor out(patch.channels(), patch.height(), patch.width());
  const int h = patch.height(), w = patch.width();
  for (int c = 0; c < patch.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(c, i, j) = patch.at(c, h - 1 - i, w - 1 - j);
  return out;
}

CoherencyMatrix patch_mean_coherency(const PolSARScene& scene, int row, int col, int size) {
  check_window(scene, row, col, size);
  const int half = size / 2;
  CoherencyMatrix sum;
  for (int i = 0; i < size; ++i) {
    const int r = mirror_index(row - half + i, scene.height());
    for (int j = 0; j < size; ++j) sum += scene.at(r, mirror_index(col - half + j, scene.width()));
  }
  return (1.0 / (static_cast<double>(size) * size)) * sum;
}

void standardize(PatchTensor& patch, const ChannelStats& stats) {
  require(patch.channels() == kPolChannels, "standardization expects 9 channels");
  const std::size_t plane = static_cast<std::size_t>(patch.height()) * patch.width();
  auto& v = patch.values();
  for (int c = 0; c < kPolChannels; ++c) {
    const double inv = 1.0 / stats.stddev[c];
    for (std::size_t k = 0; k < plane; ++k) {
      double& x = v[c * plane + k];
      x = (x - stats.mean[c]) * inv;
    }
  }
}

}  // namespace pclnet
