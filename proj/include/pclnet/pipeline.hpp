#pragma once

#include <iosfwd>
#include <vector>

#include "pclnet/classify.hpp"
#include "pclnet/config.hpp"
#include "pclnet/diversity.hpp"

// Stage-level composition of the modules, driven by a RunConfig. Every stage
// draws from its own (seed, stage) substream so stages can be re-run alone.
namespace pclnet::pipeline {

struct ClusterStage {
  CandidateSet candidates;
  ClusterModel model;
};

ClusterStage run_cluster(const PolSARScene& scene, const RunConfig& config);

PretrainDataset run_collect(const PolSARScene& scene, const RunConfig& config,
                            ClusterStage* stage_out = nullptr);

struct PretrainStage {
  FrozenEncoder encoder;
  std::vector<TraceRow> trace;
};

PretrainStage run_pretrain(const PretrainDataset& dataset, const ChannelStats& stats,
                           const RunConfig& config, const PretrainProgress& progress = {});

/// Randomly initialized, untrained encoder with the same plan; the control arm
/// for measuring what pretraining adds.
FrozenEncoder random_encoder(const ChannelStats& stats, const RunConfig& config);

struct FinetuneStage {
  LinearClassifier classifier;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  double validation_accuracy = 0;  // 0 when no validation samples
};

/// Few-shot selection of shots_per_class pixels per class, optional disjoint
/// validation draw, and linear-head fine-tuning.
FinetuneStage run_finetune(const FrozenEncoder& encoder, const PolSARScene& scene,
                           const LabelMap& truth, const RunConfig& config);

struct EvalStage {
  EvalReport all_labeled;
  EvalReport held_out;  // labeled pixels minus the training pixels
};

/// row,col,label,h0..h{D-1} for every labeled pixel, row-major scan order.
void write_features_csv(std::ostream& out, const FrozenEncoder& encoder, const PolSARScene& scene,
                        const LabelMap& labels);

EvalStage run_eval(const LabelMap& prediction, const LabelMap& truth, const LabelMap& train_map);

}  // namespace pclnet::pipeline
