#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>

#include <Eigen/Core>

#include "pclnet/diversity.hpp"
#include "pclnet/encoder.hpp"

namespace pclnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// a.b / (|a| |b|); throws "degenerate representation" on a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct InfoNceResult {
  double loss = 0;   // summed over the batch
  Matrix d_anchor;   // dL/do,  N x D
  Matrix d_positive; // dL/do+, N x D
};

/// Memory-bank InfoNCE over N anchor/positive rows against K constant
/// negatives (K may be zero, giving loss 0 and zero gradients).
InfoNceResult info_nce(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                       double temperature);

/// FIFO of encoded positives with mini-batch granularity. Capacity must be a
/// multiple of the (fixed) batch size set by the first enqueue.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity);

  void enqueue(const Matrix& batch);
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const;
  std::size_t batch_count() const { return batches_.size(); }
  bool full() const { return size() == capacity_; }
  /// All entries, oldest first.
  Matrix entries() const;

 private:
  std::size_t capacity_;
  std::size_t batch_size_ = 0;
  std::deque<Matrix> batches_;
};

/// Main (theta, phi) and auxiliary (theta~, phi~) encoders.
struct EncoderState {
  ParamSet conv, head;
  ParamSet conv_aux, head_aux;

  /// Fresh main encoder with the auxiliary copy equal to it.
  static EncoderState initialize(const EncoderPlan& plan, std::uint64_t seed);
};

/// aux <- m * aux + (1 - m) * main, elementwise.
void momentum_update(ParamSet& aux, const ParamSet& main, double m);
void momentum_update(EncoderState& state, double m);

struct PretrainConfig {
  int epochs = 800;
  int batch_size = 512;
  int bank_size = 8192;
  double momentum = 0.999;
  double temperature = 0.4;
  SgdConfig sgd{0.1, {300, 500}, 0.5, 512};
  EncoderPlan plan;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  int epoch = 0;
  int step = 0;
  double loss = 0;  // mean over the batch
  double learning_rate = 0;
  std::size_t bank_fill = 0;  // negatives used for this step
};

struct PretrainResult {
  EncoderState state;
  std::vector<TraceRow> trace;

  std::vector<double> epoch_mean_loss() const;
};

using PretrainProgress = std::function<void(const TraceRow&)>;

/// Contrastive pretraining. Positives are the 180-degree rotations of the
/// anchors; the first step only seeds the bank. Steps per epoch are
/// ceil(|dataset| / N); the last batch wraps around the shuffled order.
PretrainResult pretrain(const PretrainDataset& dataset, const ChannelStats& stats,
                        const PretrainConfig& config, const PretrainProgress& progress = {});

/// One optimization step's loss and gradients on the main encoder, exposed
/// for gradient checking. Loss is the batch mean.
struct StepGradients {
  double loss = 0;
  ParamSet d_conv, d_head;
};
StepGradients contrastive_step_gradients(const EncoderState& state, const Tensor& anchors,
                                         const Tensor& positives, const Matrix& negatives,
                                         double temperature);

/// epoch,step,loss,learning_rate,bank_fill
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

Matrix to_matrix(const Tensor& t);

}  // namespace pclnet
