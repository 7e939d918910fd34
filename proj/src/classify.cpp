#include "pclnet/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "pclnet/error.hpp"
#include "pclnet/parallel.hpp"

namespace pclnet {

int FrozenEncoder::feature_dim() const {
  const int stages = conv_stages(conv);
  return conv[2 * static_cast<std::size_t>(stages - 1)].dims[0];
}

LinearClassifier LinearClassifier::zeros(int num_classes, int feature_dim) {
  LinearClassifier c;
  c.num_classes = num_classes;
  c.feature_dim = feature_dim;
  c.weights.assign(static_cast<std::size_t>(num_classes) * feature_dim, 0.0);
  c.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
  c.validate();
  return c;
}

void LinearClassifier::validate() const {
  require(num_classes >= 2, "classifier needs at least 2 classes");
  require(feature_dim >= 1, "classifier feature dimension must be >= 1");
  require(weights.size() == static_cast<std::size_t>(num_classes) * feature_dim &&
              bias.size() == static_cast<std::size_t>(num_classes),
          "classifier parameter shapes are inconsistent");
  for (double w : weights)
    if (!std::isfinite(w)) fail(ErrorKind::numeric, "non-finite classifier weight");
  for (double b : bias)
    if (!std::isfinite(b)) fail(ErrorKind::numeric, "non-finite classifier bias");
}

std::vector<double> LinearClassifier::logits(std::span<const double> h) const {
  require(h.size() == static_cast<std::size_t>(feature_dim), "feature dimension mismatch");
  std::vector<double> z(bias);
  for (int c = 0; c < num_classes; ++c) {
    const double* w = weights.data() + static_cast<std::size_t>(c) * feature_dim;
    for (int k = 0; k < feature_dim; ++k) z[static_cast<std::size_t>(c)] += w[k] * h[static_cast<std::size_t>(k)];
  }
  return z;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - top));
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> classify_probabilities(const FrozenEncoder& encoder,
                                           const LinearClassifier& classifier,
                                           const PatchTensor& patch) {
  const std::size_t idx = 0;
  const Tensor x = make_batch(std::span(&patch, 1), std::span(&idx, 1), encoder.stats);
  const Tensor h = conv_encoder_forward(encoder.conv, x);
  return softmax(classifier.logits(h.v));
}

Matrix encode_positions(const FrozenEncoder& encoder, const PolSARScene& scene,
                        std::span<const Candidate> positions) {
  const std::size_t n = positions.size();
  const int dim = encoder.feature_dim();
  Matrix out(static_cast<Eigen::Index>(n), dim);
  parallel_chunks(n, 64, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<PatchTensor> patches;
    patches.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
      patches.push_back(extract_patch(scene, positions[i].row, positions[i].col, encoder.patch_size));
    std::vector<std::size_t> idx(patches.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor h = conv_encoder_forward(encoder.conv, make_batch(patches, idx, encoder.stats));
    out.middleRows(static_cast<Eigen::Index>(b), h.n) = to_matrix(h);
  });
  return out;
}

void FinetuneConfig::validate() const {
  require(epochs >= 1, "finetune epochs must be >= 1");
  require(learning_rate > 0, "finetune learning_rate must be > 0");
  require(batch_size >= 1, "finetune batch_size must be >= 1");
}

LinearClassifier finetune_features(const Matrix& features, std::span<const std::int32_t> labels,
                                   int num_classes, const FinetuneConfig& config) {
  config.validate();
  require(static_cast<std::size_t>(features.rows()) == labels.size(),
          "one label per feature row is required");
  std::vector<char> covered(static_cast<std::size_t>(num_classes) + 1, 0);
  for (auto l : labels) {
    require(l >= 1 && l <= num_classes, "training label out of range");
    covered[static_cast<std::size_t>(l)] = 1;
  }
  for (int c = 1; c <= num_classes; ++c)
    if (!covered[static_cast<std::size_t>(c)])
      fail(ErrorKind::invalid_argument, "uncovered class " + std::to_string(c));

  const auto dim = static_cast<int>(features.cols());
  LinearClassifier clf = LinearClassifier::zeros(num_classes, dim);
  Eigen::Map<Matrix> w(clf.weights.data(), num_classes, dim);
  Eigen::Map<Eigen::VectorXd> bias(clf.bias.data(), num_classes);

  Rng shuffle = substream(config.seed, "finetune.shuffle");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  Matrix dw(num_classes, dim);
  Eigen::VectorXd db(num_classes);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      dw.setZero();
      db.setZero();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        Eigen::VectorXd z = w * features.row(static_cast<Eigen::Index>(i)).transpose() + bias;
        z.array() -= z.maxCoeff();
        z = z.array().exp();
        z /= z.sum();
        z(labels[i] - 1) -= 1.0;
        dw.noalias() += z * features.row(static_cast<Eigen::Index>(i));
        db += z;
      }
      const double step = config.learning_rate / static_cast<double>(end - start);
      w -= step * dw;
      bias -= step * db;
    }
  }
  clf.validate();
  return clf;
}

std::vector<LabeledSample> select_labeled(const LabelMap& truth, int per_class,
                                          std::uint64_t seed, const LabelMap* exclude) {
  require(per_class >= 1, "samples per class must be >= 1");
  if (exclude)
    require(exclude->height() == truth.height() && exclude->width() == truth.width(),
            "exclusion map shape differs from the truth map");
  std::vector<std::vector<std::size_t>> pool(static_cast<std::size_t>(truth.num_classes()) + 1);
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const auto l = truth.labels()[p];
    if (l == 0 || (exclude && exclude->labels()[p] != 0)) continue;
    pool[static_cast<std::size_t>(l)].push_back(p);
  }
  std::vector<LabeledSample> out;
  for (int c = 1; c <= truth.num_classes(); ++c) {
    auto& ids = pool[static_cast<std::size_t>(c)];
    Rng rng = substream(seed, "select.labeled", static_cast<std::uint64_t>(c));
    const std::size_t take = std::min(ids.size(), static_cast<std::size_t>(per_class));
    for (std::size_t i = 0; i < take; ++i) std::swap(ids[i], ids[i + uniform_index(rng, ids.size() - i)]);
    ids.resize(take);
    std::sort(ids.begin(), ids.end());
    for (auto p : ids)
      out.push_back({static_cast<int>(p / static_cast<std::size_t>(truth.width())),
                     static_cast<int>(p % static_cast<std::size_t>(truth.width())), c});
  }
  return out;
}

LinearClassifier finetune(const FrozenEncoder& encoder, const PolSARScene& scene,
                          std::span<const LabeledSample> samples, int num_classes,
                          const FinetuneConfig& config) {
  std::vector<Candidate> positions;
  std::vector<std::int32_t> labels;
  for (const auto& s : samples) {
    positions.push_back({s.row, s.col});
    labels.push_back(s.label);
  }
  const Matrix features = encode_positions(encoder, scene, positions);
  return finetune_features(features, labels, num_classes, config);
}

LabelMap predict_map(const PolSARScene& scene, const FrozenEncoder& encoder,
                     const LinearClassifier& classifier) {
  classifier.validate();
  require(classifier.feature_dim == encoder.feature_dim(),
          "classifier does not match the encoder feature dimension");
  std::vector<Candidate> positions;
  positions.reserve(scene.size());
  for (int r = 0; r < scene.height(); ++r)
    for (int c = 0; c < scene.width(); ++c) positions.push_back({r, c});
  const Matrix h = encode_positions(encoder, scene, positions);

  std::vector<std::int32_t> labels(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto z = classifier.logits(std::span(h.row(static_cast<Eigen::Index>(i)).data(),
                                               static_cast<std::size_t>(h.cols())));
    labels[i] = static_cast<std::int32_t>(std::max_element(z.begin(), z.end()) - z.begin()) + 1;
  }
  return LabelMap(scene.height(), scene.width(), classifier.num_classes, std::move(labels));
}

LabelMap samples_to_map(std::span<const LabeledSample> samples, int height, int width,
                        int num_classes) {
  LabelMap map(height, width, num_classes);
  for (const auto& s : samples) map.set(s.row, s.col, s.label);
  return map;
}

EvalReport evaluate_confusion(std::span<const std::uint64_t> confusion, int num_classes) {
  require(num_classes >= 1, "num_classes must be >= 1");
  const auto c = static_cast<std::size_t>(num_classes);
  require(confusion.size() == c * c, "confusion matrix must be C x C");
  EvalReport r;
  r.num_classes = num_classes;
  r.confusion.assign(confusion.begin(), confusion.end());
  std::vector<double> rows(c, 0.0), cols(c, 0.0);
  double correct = 0;
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const auto v = static_cast<double>(confusion[i * c + j]);
      rows[i] += v;
      cols[j] += v;
      r.total += confusion[i * c + j];
    }
    correct += static_cast<double>(confusion[i * c + i]);
  }
  if (r.total == 0) fail(ErrorKind::invalid_argument, "no labeled pixels to evaluate");
  const auto total = static_cast<double>(r.total);
  r.overall_accuracy = correct / total;

  double recall_sum = 0;
  int present = 0;
  r.per_class_accuracy.assign(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    if (rows[i] == 0) continue;
    r.per_class_accuracy[i] = static_cast<double>(confusion[i * c + i]) / rows[i];
    recall_sum += r.per_class_accuracy[i];
    ++present;
  }
  r.average_accuracy = recall_sum / present;

  double chance = 0;
  for (std::size_t i = 0; i < c; ++i) chance += rows[i] * cols[i];
  chance /= total * total;
  r.kappa = chance < 1.0 ? (r.overall_accuracy - chance) / (1.0 - chance)
                         : (r.overall_accuracy == 1.0 ? 1.0 : 0.0);
  return r;
}

EvalReport evaluate(const LabelMap& prediction, const LabelMap& truth, const LabelMap* exclude) {
  require(prediction.height() == truth.height() && prediction.width() == truth.width(),
          "prediction and truth maps differ in shape");
  if (exclude)
    require(exclude->height() == truth.height() && exclude->width() == truth.width(),
            "exclusion map differs in shape");
  const int c = truth.num_classes();
  std::vector<std::uint64_t> confusion(static_cast<std::size_t>(c) * c, 0);
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const auto t = truth.labels()[p];
    if (t == 0 || (exclude && exclude->labels()[p] != 0)) continue;
    const auto y = prediction.labels()[p];
    if (y < 1 || y > c) fail(ErrorKind::invalid_argument, "prediction label out of range at pixel " + std::to_string(p));
    ++confusion[static_cast<std::size_t>(t - 1) * c + static_cast<std::size_t>(y - 1)];
  }
  return evaluate_confusion(confusion, c);
}

void write_report_text(std::ostream& out, const EvalReport& r) {
  char buf[128];
  out << "{\n";
  std::snprintf(buf, sizeof buf, "  \"pixels\": %llu,\n", static_cast<unsigned long long>(r.total));
  out << buf;
  std::snprintf(buf, sizeof buf, "  \"overall_accuracy\": %.10f,\n", r.overall_accuracy);
  out << buf;
  std::snprintf(buf, sizeof buf, "  \"average_accuracy\": %.10f,\n", r.average_accuracy);
  out << buf;
  std::snprintf(buf, sizeof buf, "  \"kappa\": %.10f,\n", r.kappa);
  out << buf;
  out << "  \"per_class_accuracy\": [";
  for (std::size_t i = 0; i < r.per_class_accuracy.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.10f", i ? ", " : "", r.per_class_accuracy[i]);
    out << buf;
  }
  out << "]\n}\n";
}

void write_confusion_csv(std::ostream& out, const EvalReport& r) {
  out << "truth\\pred";
  for (int j = 1; j <= r.num_classes; ++j) out << ',' << j;
  out << '\n';
  for (int i = 0; i < r.num_classes; ++i) {
    out << i + 1;
    for (int j = 0; j < r.num_classes; ++j) out << ',' << r.at(i, j);
    out << '\n';
  }
}

}  // namespace pclnet
