#include "pclnet/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "pclnet/error.hpp"

namespace pclnet::pipeline {

ClusterStage run_cluster(const PolSARScene& scene, const RunConfig& config) {
  config.validate();
  ClusterStage stage;
  stage.candidates =
      sample_candidates(scene, config.cluster.candidate_stride, config.collect.patch_size);
  stage.model = wishart_cluster(stage.candidates.representatives, config.cluster.num_clusters,
                                config.cluster.max_iter, derive_seed(config.seed, "stage.cluster"));
  return stage;
}

PretrainDataset run_collect(const PolSARScene& scene, const RunConfig& config,
                            ClusterStage* stage_out) {
  ClusterStage stage = run_cluster(scene, config);
  PretrainDataset ds = collect_dataset(scene, stage.candidates, stage.model, config.collect_options());
  if (stage_out) *stage_out = std::move(stage);
  return ds;
}

PretrainStage run_pretrain(const PretrainDataset& dataset, const ChannelStats& stats,
                           const RunConfig& config, const PretrainProgress& progress) {
  config.validate();
  if (dataset.patch_size != config.collect.patch_size)
    fail(ErrorKind::invalid_argument, "dataset patch size " + std::to_string(dataset.patch_size) +
                                          " differs from the configured patch_size");
  PretrainResult r = pretrain(dataset, stats, config.pretrain_config(), progress);
  return {FrozenEncoder{std::move(r.state.conv), stats, dataset.patch_size}, std::move(r.trace)};
}

FrozenEncoder random_encoder(const ChannelStats& stats, const RunConfig& config) {
  const EncoderState s = EncoderState::initialize(EncoderPlan{}, config.pretrain_config().seed);
  return FrozenEncoder{s.conv, stats, config.collect.patch_size};
}

FinetuneStage run_finetune(const FrozenEncoder& encoder, const PolSARScene& scene,
                           const LabelMap& truth, const RunConfig& config) {
  config.validate();
  require(truth.height() == scene.height() && truth.width() == scene.width(),
          "label map shape differs from the scene");
  require(truth.num_classes() >= 2, "fine-tuning needs at least two classes");
  const auto ft = config.finetune_config();
  FinetuneStage stage;
  stage.train = select_labeled(truth, config.finetune.shots_per_class, derive_seed(ft.seed, "train"));
  stage.classifier = finetune(encoder, scene, stage.train, truth.num_classes(), ft);

  if (config.finetune.validation_per_class > 0) {
    const LabelMap train_map = samples_to_map(stage.train, truth.height(), truth.width(), truth.num_classes());
    stage.validation = select_labeled(truth, config.finetune.validation_per_class,
                                      derive_seed(ft.seed, "validation"), &train_map);
    if (!stage.validation.empty()) {
      std::vector<Candidate> pos;
      for (const auto& s : stage.validation) pos.push_back({s.row, s.col});
      const Matrix h = encode_positions(encoder, scene, pos);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < pos.size(); ++i) {
        const auto z = stage.classifier.logits(
            std::span(h.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(h.cols())));
        const auto best = std::max_element(z.begin(), z.end()) - z.begin() + 1;
        if (best == stage.validation[i].label) ++correct;
      }
      stage.validation_accuracy = static_cast<double>(correct) / static_cast<double>(pos.size());
    }
  }
  return stage;
}

void write_features_csv(std::ostream& out, const FrozenEncoder& encoder, const PolSARScene& scene,
                        const LabelMap& labels) {
  require(labels.height() == scene.height() && labels.width() == scene.width(),
          "label map shape differs from the scene");
  std::vector<Candidate> pos;
  std::vector<std::int32_t> lab;
  for (int r = 0; r < labels.height(); ++r)
    for (int c = 0; c < labels.width(); ++c)
      if (labels.at(r, c) > 0) {
        pos.push_back({r, c});
        lab.push_back(labels.at(r, c));
      }
  const Matrix h = encode_positions(encoder, scene, pos);
  out << "row,col,label";
  for (Eigen::Index j = 0; j < h.cols(); ++j) out << ",h" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < pos.size(); ++i) {
    out << pos[i].row << ',' << pos[i].col << ',' << lab[i];
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", h(static_cast<Eigen::Index>(i), j));
      out << buf;
    }
    out << '\n';
  }
}

EvalStage run_eval(const LabelMap& prediction, const LabelMap& truth, const LabelMap& train_map) {
  return {evaluate(prediction, truth), evaluate(prediction, truth, &train_map)};
}

}  // namespace pclnet::pipeline
