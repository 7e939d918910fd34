#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pclnet/contrastive.hpp"
#include "pclnet/scene.hpp"

namespace pclnet {

/// Frozen convolutional encoder together with the input standardization it
/// was trained with.
struct FrozenEncoder {
  ParamSet conv;
  ChannelStats stats = ChannelStats::identity();
  int patch_size = 15;

  int feature_dim() const;
};

/// Softmax head: probabilities = softmax(W h + b), W is C x D.
struct LinearClassifier {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<double> weights;  // row-major C x D
  std::vector<double> bias;     // C

  static LinearClassifier zeros(int num_classes, int feature_dim);
  void validate() const;
  std::vector<double> logits(std::span<const double> h) const;
  friend bool operator==(const LinearClassifier&, const LinearClassifier&) = default;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Class probabilities for one raw (unstandardized) patch.
std::vector<double> classify_probabilities(const FrozenEncoder& encoder,
                                           const LinearClassifier& classifier,
                                           const PatchTensor& patch);

/// h for every position, one row per position.
Matrix encode_positions(const FrozenEncoder& encoder, const PolSARScene& scene,
                        std::span<const Candidate> positions);

struct FinetuneConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mini-batch SGD on mean cross-entropy over fixed features; labels are 1..C.
LinearClassifier finetune_features(const Matrix& features, std::span<const std::int32_t> labels,
                                   int num_classes, const FinetuneConfig& config);

struct LabeledSample {
  int row = 0;
  int col = 0;
  std::int32_t label = 0;
};

/// `per_class` labeled pixels of every class, drawn without replacement from
/// the truth map (seeded). Pixels labeled in `exclude` are skipped. Classes
/// with fewer pixels contribute all of them.
std::vector<LabeledSample> select_labeled(const LabelMap& truth, int per_class,
                                          std::uint64_t seed, const LabelMap* exclude = nullptr);

/// Fine-tunes the linear head on frozen features of the labeled pixels.
/// Throws "uncovered class" if some class has no sample.
LinearClassifier finetune(const FrozenEncoder& encoder, const PolSARScene& scene,
                          std::span<const LabeledSample> samples, int num_classes,
                          const FinetuneConfig& config);

/// argmax class (lowest index on ties) for every pixel.
LabelMap predict_map(const PolSARScene& scene, const FrozenEncoder& encoder,
                     const LinearClassifier& classifier);

/// Label map holding only the given samples.
LabelMap samples_to_map(std::span<const LabeledSample> samples, int height, int width,
                        int num_classes);

struct EvalReport {
  int num_classes = 0;
  std::vector<std::uint64_t> confusion;  // row = truth, column = prediction
  std::vector<double> per_class_accuracy;
  double overall_accuracy = 0;
  double average_accuracy = 0;
  double kappa = 0;
  std::uint64_t total = 0;

  std::uint64_t at(int truth, int pred) const {
    return confusion[static_cast<std::size_t>(truth) * num_classes + pred];
  }
};

/// OA, AA and Cohen's kappa of a C x C confusion matrix (row = truth).
EvalReport evaluate_confusion(std::span<const std::uint64_t> confusion, int num_classes);

/// Compares over pixels with a nonzero truth label, skipping pixels labeled in
/// `exclude` when given.
EvalReport evaluate(const LabelMap& prediction, const LabelMap& truth,
                    const LabelMap* exclude = nullptr);

void write_report_text(std::ostream& out, const EvalReport& report);
void write_confusion_csv(std::ostream& out, const EvalReport& report);

}  // namespace pclnet
