#include "pclnet/encoder.hpp"

#include <string>

#include "pclnet/error.hpp"

namespace pclnet {

ParamSet init_conv_encoder(const EncoderPlan& plan, Rng& rng) {
  require(!plan.conv_channels.empty(), "encoder needs at least one conv stage");
  ParamSet params;
  int in = plan.in_channels;
  for (std::size_t i = 0; i < plan.conv_channels.size(); ++i) {
    const int out = plan.conv_channels[i];
    const std::string prefix = "conv" + std::to_string(i + 1);
    params.push_back(kaiming_uniform(prefix + ".weight", {out, in, 3, 3}, in * 9, rng));
    params.push_back(zero_param(prefix + ".bias", {out}));
    in = out;
  }
  return params;
}

ParamSet init_projection_head(const EncoderPlan& plan, Rng& rng) {
  require(!plan.head_dims.empty(), "projection head needs at least one layer");
  ParamSet params;
  int in = plan.feature_dim();
  for (std::size_t i = 0; i < plan.head_dims.size(); ++i) {
    const int out = plan.head_dims[i];
    const std::string prefix = "head.fc" + std::to_string(i + 1);
    params.push_back(kaiming_uniform(prefix + ".weight", {out, in}, in, rng));
    params.push_back(zero_param(prefix + ".bias", {out}));
    in = out;
  }
  return params;
}

int conv_stages(const ParamSet& conv) {
  if (conv.empty() || conv.size() % 2 != 0)
    fail(ErrorKind::invalid_argument, "conv encoder parameters must be weight/bias pairs");
  return static_cast<int>(conv.size() / 2);
}

Tensor conv_encoder_forward(const ParamSet& conv, const Tensor& x, ConvCache* cache) {
  const int stages = conv_stages(conv);
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
    cache->argmax.clear();
  }
  Tensor cur = x;
  for (int s = 0; s < stages; ++s) {
    Tensor a = relu_forward(conv2d_forward(cur, conv[2 * s], conv[2 * s + 1]));
    PoolResult pool = maxpool2_forward(a);
    if (cache) {
      cache->inputs.push_back(std::move(cur));
      cache->activations.push_back(std::move(a));
      cache->argmax.push_back(std::move(pool.argmax));
    }
    cur = std::move(pool.y);
  }
  Tensor h = gap_forward(cur);
  if (cache) cache->pooled = std::move(cur);
  return h;
}

void conv_encoder_backward(const ParamSet& conv, const ConvCache& cache, const Tensor& dh,
                           ParamSet& grads) {
  const int stages = conv_stages(conv);
  if (static_cast<int>(cache.inputs.size()) != stages)
    fail(ErrorKind::state, "conv encoder cache does not match the parameters");
  Tensor d = gap_backward(cache.pooled, dh);
  for (int s = stages - 1; s >= 0; --s) {
    const auto st = static_cast<std::size_t>(s);
    d = maxpool2_backward(cache.activations[st], cache.argmax[st], d);
    d = relu_backward(cache.activations[st], d);
    d = conv2d_backward(cache.inputs[st], conv[2 * st], d, grads[2 * st], grads[2 * st + 1], s > 0);
  }
}

Tensor projection_head_forward(const ParamSet& head, const Tensor& h, HeadCache* cache) {
  if (head.size() != 4) fail(ErrorKind::invalid_argument, "projection head must have two layers");
  Tensor pre = linear_forward(h, head[0], head[1]);
  Tensor hidden = relu_forward(pre);
  Tensor o = linear_forward(hidden, head[2], head[3]);
  if (cache) {
    cache->h = h;
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return o;
}

Tensor projection_head_backward(const ParamSet& head, const HeadCache& cache, const Tensor& d_o,
                                ParamSet& grads) {
  Tensor d_hidden = linear_backward(cache.hidden, head[2], d_o, grads[2], grads[3]);
  d_hidden = relu_backward(cache.hidden_pre, d_hidden);
  return linear_backward(cache.h, head[0], d_hidden, grads[0], grads[1]);
}

Tensor encode(const ParamSet& conv, const ParamSet& head, const Tensor& x) {
  return projection_head_forward(head, conv_encoder_forward(conv, x));
}

Tensor make_batch(std::span<const PatchTensor> patches, std::span<const std::size_t> indices,
                  const ChannelStats& stats, bool rotate) {
  require(!indices.empty(), "empty batch");
  const PatchTensor& first = patches[indices[0]];
  Tensor batch(static_cast<int>(indices.size()), first.channels(), first.height(), first.width());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    PatchTensor p = rotate ? rotate180(patches[indices[b]]) : patches[indices[b]];
    if (p.channels() != first.channels() || p.height() != first.height() ||
        p.width() != first.width())
      fail(ErrorKind::invalid_argument, "patches in a batch must share one shape");
    standardize(p, stats);
    std::copy(p.values().begin(), p.values().end(), batch.sample(static_cast<int>(b)));
  }
  return batch;
}

}  // namespace pclnet
