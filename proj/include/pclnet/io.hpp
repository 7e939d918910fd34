#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pclnet/classify.hpp"
#include "pclnet/diversity.hpp"
#include "pclnet/scene.hpp"

namespace pclnet::io {

namespace fs = std::filesystem;

// Scene: "T3BIN\0", u32 version=1, u32 height, u32 width,
// then height*width*9 float32 in storage order, row-major.
void write_scene(const fs::path& path, const PolSARScene& scene);
PolSARScene read_scene(const fs::path& path);

// Labels: "LBL\0", u32 version=1, u32 height, u32 width, u32 num_classes,
// then height*width int32.
void write_labels(const fs::path& path, const LabelMap& labels);
LabelMap read_labels(const fs::path& path);

// Anchor patches: "PDS\0", u32 version=1, u32 count, u32 channels,
// u32 patch_size, then count*channels*patch_size^2 float32.
void write_patches(const fs::path& path, const PretrainDataset& dataset);
/// Patches only; provenance comes from the manifest.
PretrainDataset read_patches(const fs::path& path);
/// Reads the sample_id,row,col,cluster_id manifest into dataset.provenance.
void read_manifest(const fs::path& path, PretrainDataset& dataset);

// Checkpoint: "CKPT", u32 version=1, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rank, rank x u32 dims, float32 payload.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};
void write_checkpoint(const fs::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const fs::path& path);

/// Encoder checkpoint: conv parameters plus "input.mean", "input.std" and
/// "input.patch_size".
void write_encoder(const fs::path& path, const FrozenEncoder& encoder);
FrozenEncoder read_encoder(const fs::path& path);

/// Classifier checkpoint: "classifier.weight" [C, D], "classifier.bias" [C].
void write_classifier(const fs::path& path, const LinearClassifier& classifier);
LinearClassifier read_classifier(const fs::path& path);

/// Class 1..16 map onto the fixed palette (repeating past 16); 0 is black.
struct Rgb {
  std::uint8_t r, g, b;
};
const std::vector<Rgb>& class_palette();
void write_label_png(const fs::path& path, const LabelMap& labels);

/// Text file helpers that raise pclnet::Error on failure.
void write_text(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

}  // namespace pclnet::io
