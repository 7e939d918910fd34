#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pclnet/rng.hpp"

namespace pclnet {

/// Dense (batch, channels, height, width) tensor. Feature matrices are
/// (batch, features, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 1, w = 1;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_ = 1, int w_ = 1)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t size() const { return v.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  double* sample(int i) { return v.data() + i * sample_size(); }
  const double* sample(int i) const { return v.data() + i * sample_size(); }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Throws a numeric error naming `where` if any value is NaN or infinite.
void check_finite(const Tensor& t, const char* where);

/// Named learnable tensor.
struct Param {
  std::string name;
  std::vector<int> dims;
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
  friend bool operator==(const Param&, const Param&) = default;
};

using ParamSet = std::vector<Param>;

ParamSet zeros_like(const ParamSet& params);
std::size_t parameter_count(const ParamSet& params);
const Param& find_param(const ParamSet& params, const std::string& name);

/// Kaiming-uniform weights, bound sqrt(6 / fan_in); zero bias.
Param kaiming_uniform(std::string name, std::vector<int> dims, int fan_in, Rng& rng);
Param zero_param(std::string name, std::vector<int> dims);

// 3x3 convolution, stride 1, zero padding 1. weight: [out, in, 3, 3].
Tensor conv2d_forward(const Tensor& x, const Param& weight, const Param& bias);
/// Accumulates parameter gradients; returns dL/dx unless input_grad is false
/// (then an empty tensor).
Tensor conv2d_backward(const Tensor& x, const Param& weight, const Tensor& dy, Param& dweight,
                       Param& dbias, bool input_grad = true);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// 2x2 max pooling with stride 2; a trailing odd row/column is dropped.
struct PoolResult {
  Tensor y;
  std::vector<std::uint32_t> argmax;  // flat index into x per output element
};
PoolResult maxpool2_forward(const Tensor& x);
Tensor maxpool2_backward(const Tensor& x_shape, const std::vector<std::uint32_t>& argmax,
                         const Tensor& dy);

/// Global average pooling to (n, c, 1, 1).
Tensor gap_forward(const Tensor& x);
Tensor gap_backward(const Tensor& x_shape, const Tensor& dy);

/// y = W x + b with weight [out, in].
Tensor linear_forward(const Tensor& x, const Param& weight, const Param& bias);
Tensor linear_backward(const Tensor& x, const Param& weight, const Tensor& dy, Param& dweight,
                       Param& dbias, bool input_grad = true);

struct SgdConfig {
  double learning_rate = 0.1;
  std::vector<int> milestones;
  double factor = 0.5;
  int batch_size = 512;

  void validate() const;
};

/// lr0 * factor^(number of milestones <= epoch); epochs count from 0.
double learning_rate_at(const SgdConfig& config, int epoch);

/// p <- p - lr(epoch) * g. Throws "divergence" on a non-finite gradient.
void sgd_step(ParamSet& params, const ParamSet& grads, int epoch, const SgdConfig& config);

struct GradCheckReport {
  double max_rel_error = 0;
  double max_abs_error = 0;
  std::size_t worst_index = 0;
  bool passed = false;
};

/// Central differences with step h against an analytic gradient. Relative
/// error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> point, std::span<const double> analytic,
                           double tolerance, double h = 1e-4);

}  // namespace pclnet
