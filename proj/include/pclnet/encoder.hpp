#pragma once

#include <span>
#include <vector>

#include "pclnet/nn.hpp"
#include "pclnet/patch.hpp"

namespace pclnet {

/// Layer plan of the encoder: conv-ReLU-maxpool stages followed by GAP
/// (the convolutional encoder), then FC-ReLU-FC (the projection head).
struct EncoderPlan {
  int in_channels = kPolChannels;
  std::vector<int> conv_channels{16, 32, 64};
  std::vector<int> head_dims{64, 32};

  int feature_dim() const { return conv_channels.back(); }
  int output_dim() const { return head_dims.back(); }
};

/// conv{i}.weight / conv{i}.bias for i = 1..stages.
ParamSet init_conv_encoder(const EncoderPlan& plan, Rng& rng);
/// head.fc{i}.weight / head.fc{i}.bias.
ParamSet init_projection_head(const EncoderPlan& plan, Rng& rng);

/// Number of conv stages in a conv-encoder parameter set.
int conv_stages(const ParamSet& conv);

struct ConvCache {
  std::vector<Tensor> inputs;      // input of each conv
  std::vector<Tensor> activations; // ReLU output of each conv (pool input)
  std::vector<std::vector<std::uint32_t>> argmax;
  Tensor pooled;                   // GAP input
};

struct HeadCache {
  Tensor h;
  Tensor hidden_pre;  // fc1 output before ReLU
  Tensor hidden;
};

/// h = f_theta(x): (n, C, H, W) -> (n, feature_dim).
Tensor conv_encoder_forward(const ParamSet& conv, const Tensor& x, ConvCache* cache = nullptr);
/// Accumulates into grads (same layout as conv).
void conv_encoder_backward(const ParamSet& conv, const ConvCache& cache, const Tensor& dh,
                           ParamSet& grads);

/// o = W2 relu(W1 h + b1) + b2.
Tensor projection_head_forward(const ParamSet& head, const Tensor& h, HeadCache* cache = nullptr);
/// Accumulates into grads; returns dL/dh.
Tensor projection_head_backward(const ParamSet& head, const HeadCache& cache, const Tensor& d_o,
                                ParamSet& grads);

/// o = g_phi(f_theta(x)).
Tensor encode(const ParamSet& conv, const ParamSet& head, const Tensor& x);

/// Stacks patches (optionally rotated by 180 degrees) into a batch tensor,
/// standardizing each channel with `stats`.
Tensor make_batch(std::span<const PatchTensor> patches, std::span<const std::size_t> indices,
                  const ChannelStats& stats, bool rotate = false);

}  // namespace pclnet
