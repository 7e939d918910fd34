#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pclnet/classify.hpp"
#include "pclnet/contrastive.hpp"
#include "pclnet/scene.hpp"

namespace pclnet {

/// Every hyperparameter of a pipeline run. Defaults are the full-scale
/// settings; the synthetic scene defaults describe the bundled three-class
/// demo.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;

  struct Synth {
    int height = 64;
    int width = 192;
    int looks = 8;
    int classes = 3;
    /// Per-class covariance overrides ("class.N = 9 numbers"); missing
    /// classes use default_class_covariances().
    std::vector<std::pair<int, CoherencyMatrix>> covariances;
    friend bool operator==(const Synth&, const Synth&) = default;
  } synth;

  struct Cluster {
    int num_clusters = 35;
    int max_iter = 50;
    int candidate_stride = 4;
    friend bool operator==(const Cluster&, const Cluster&) = default;
  } cluster;

  struct Collect {
    double gamma = 0.42;
    int samples_per_cluster = 600;
    int patch_size = 15;
    friend bool operator==(const Collect&, const Collect&) = default;
  } collect;

  struct Pretrain {
    int epochs = 800;
    double learning_rate = 0.1;
    std::vector<int> milestones{300, 500};
    double lr_factor = 0.5;
    int batch_size = 512;
    int bank_size = 8192;
    double momentum = 0.999;
    double temperature = 0.4;
    friend bool operator==(const Pretrain&, const Pretrain&) = default;
  } pretrain;

  struct Finetune {
    int epochs = 300;
    double learning_rate = 0.01;
    int batch_size = 32;
    int shots_per_class = 20;
    int validation_per_class = 200;
    friend bool operator==(const Finetune&, const Finetune&) = default;
  } finetune;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  /// Re-checks every constraint; throws naming the offending key.
  void validate() const;

  SyntheticSceneSpec synth_spec() const;
  PretrainConfig pretrain_config() const;
  FinetuneConfig finetune_config() const;
  CollectOptions collect_options() const;
};

/// Strict "key = value" parser with [section] headers and '#' comments.
/// Omitted keys keep their defaults; unknown keys, malformed values and
/// constraint violations raise an error naming the key and line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Full effective configuration in the same format; re-parses to an equal
/// RunConfig.
std::string format_config(const RunConfig& config);

}  // namespace pclnet
