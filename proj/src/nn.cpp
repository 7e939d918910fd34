#include "pclnet/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "pclnet/error.hpp"

namespace pclnet {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void check_conv_shapes(const Tensor& x, const Param& weight, const Param& bias) {
  if (weight.dims.size() != 4 || weight.dims[2] != 3 || weight.dims[3] != 3)
    fail(ErrorKind::invalid_argument, "conv weight " + weight.name + " must be [out, in, 3, 3]");
  if (weight.dims[1] != x.c)
    fail(ErrorKind::invalid_argument, "conv " + weight.name + " expects " +
                                          std::to_string(weight.dims[1]) + " input channels, got " +
                                          std::to_string(x.c));
  if (bias.size() != static_cast<std::size_t>(weight.dims[0]))
    fail(ErrorKind::invalid_argument, "conv bias " + bias.name + " does not match output channels");
}

// (in*9) x (h*w) patch matrix of one sample, zero padding 1.
void im2col(const double* x, int channels, int h, int w, RowMatrix& col) {
  col.resize(channels * 9, h * w);
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < 3; ++ki) {
      for (int kj = 0; kj < 3; ++kj) {
        double* row = col.row(c * 9 + ki * 3 + kj).data();
        for (int i = 0; i < h; ++i) {
          const int si = i + ki - 1;
          for (int j = 0; j < w; ++j) {
            const int sj = j + kj - 1;
            row[i * w + j] = (si >= 0 && si < h && sj >= 0 && sj < w) ? plane[si * w + sj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMatrix& col, int channels, int h, int w, double* dx) {
  for (int c = 0; c < channels; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < 3; ++ki) {
      for (int kj = 0; kj < 3; ++kj) {
        const double* row = col.row(c * 9 + ki * 3 + kj).data();
        for (int i = 0; i < h; ++i) {
          const int si = i + ki - 1;
          if (si < 0 || si >= h) continue;
          for (int j = 0; j < w; ++j) {
            const int sj = j + kj - 1;
            if (sj >= 0 && sj < w) plane[si * w + sj] += row[i * w + j];
          }
        }
      }
    }
  }
}
}  // namespace

void check_finite(const Tensor& t, const char* where) {
  for (double x : t.v)
    if (!std::isfinite(x)) fail(ErrorKind::numeric, std::string("non-finite value in ") + where);
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out = params;
  for (auto& p : out) std::fill(p.value.begin(), p.value.end(), 0.0);
  return out;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

const Param& find_param(const ParamSet& params, const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p;
  fail(ErrorKind::invalid_argument, "missing parameter " + name);
}

Param zero_param(std::string name, std::vector<int> dims) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return {std::move(name), std::move(dims), std::vector<double>(n, 0.0)};
}

Param kaiming_uniform(std::string name, std::vector<int> dims, int fan_in, Rng& rng) {
  Param p = zero_param(std::move(name), std::move(dims));
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& x : p.value) x = u(rng);
  return p;
}

Tensor conv2d_forward(const Tensor& x, const Param& weight, const Param& bias) {
  check_conv_shapes(x, weight, bias);
  const int out_c = weight.dims[0];
  Tensor y(x.n, out_c, x.h, x.w);
  ConstMapMatrix wm(weight.value.data(), out_c, x.c * 9);
  const Eigen::Map<const Eigen::VectorXd> b(bias.value.data(), out_c);
  RowMatrix col;
  for (int s = 0; s < x.n; ++s) {
    im2col(x.sample(s), x.c, x.h, x.w, col);
    MapMatrix ym(y.sample(s), out_c, x.h * x.w);
    ym.noalias() = wm * col;
    ym.colwise() += b;
  }
  check_finite(y, "conv2d");
  return y;
}

Tensor conv2d_backward(const Tensor& x, const Param& weight, const Tensor& dy, Param& dweight,
                       Param& dbias, bool input_grad) {
  check_conv_shapes(x, weight, dbias);
  const int out_c = weight.dims[0];
  if (dy.n != x.n || dy.c != out_c || dy.h != x.h || dy.w != x.w)
    fail(ErrorKind::invalid_argument, "conv2d upstream gradient shape mismatch");
  ConstMapMatrix wm(weight.value.data(), out_c, x.c * 9);
  MapMatrix dwm(dweight.value.data(), out_c, x.c * 9);
  Eigen::Map<Eigen::VectorXd> db(dbias.value.data(), out_c);
  Tensor dx;
  if (input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  RowMatrix col, dcol;
  for (int s = 0; s < x.n; ++s) {
    ConstMapMatrix dym(dy.sample(s), out_c, x.h * x.w);
    im2col(x.sample(s), x.c, x.h, x.w, col);
    dwm.noalias() += dym * col.transpose();
    db += dym.rowwise().sum();
    if (input_grad) {
      dcol.noalias() = wm.transpose() * dym;
      col2im(dcol, x.c, x.h, x.w, dx.sample(s));
    }
  }
  return dx;
}

Tensor relu_forward(const Tensor& x) {
  check_finite(x, "relu");
  Tensor y = x;
  for (double& v : y.v) v = v > 0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  if (!x.same_shape(dy)) fail(ErrorKind::invalid_argument, "relu gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    if (!(x.v[i] > 0)) dx.v[i] = 0.0;
  return dx;
}

PoolResult maxpool2_forward(const Tensor& x) {
  if (x.h < 2 || x.w < 2) fail(ErrorKind::invalid_argument, "maxpool2 needs spatial dims >= 2");
  check_finite(x, "maxpool2");
  const int oh = x.h / 2, ow = x.w / 2;
  PoolResult r{Tensor(x.n, x.c, oh, ow), {}};
  r.argmax.resize(r.y.size());
  std::size_t o = 0;
  for (int s = 0; s < x.n; ++s) {
    for (int c = 0; c < x.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(s) * x.c + c) * x.h * x.w;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * i) * x.w + 2 * j;
          for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
              const std::size_t k = base + static_cast<std::size_t>(2 * i + di) * x.w + 2 * j + dj;
              if (x.v[k] > x.v[best]) best = k;
            }
          }
          r.y.v[o] = x.v[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const Tensor& x_shape, const std::vector<std::uint32_t>& argmax,
                         const Tensor& dy) {
  if (argmax.size() != dy.size()) fail(ErrorKind::invalid_argument, "maxpool2 gradient shape mismatch");
  Tensor dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.v[argmax[o]] += dy.v[o];
  return dx;
}

Tensor gap_forward(const Tensor& x) {
  check_finite(x, "gap");
  Tensor y(x.n, x.c);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (std::size_t k = 0; k < y.size(); ++k) {
    double sum = 0;
    for (std::size_t p = 0; p < plane; ++p) sum += x.v[k * plane + p];
    y.v[k] = sum / static_cast<double>(plane);
  }
  return y;
}

Tensor gap_backward(const Tensor& x_shape, const Tensor& dy) {
  if (dy.n != x_shape.n || dy.c != x_shape.c) fail(ErrorKind::invalid_argument, "gap gradient shape mismatch");
  Tensor dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  const std::size_t plane = static_cast<std::size_t>(x_shape.h) * x_shape.w;
  for (std::size_t k = 0; k < dy.size(); ++k) {
    const double g = dy.v[k] / static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) dx.v[k * plane + p] = g;
  }
  return dx;
}

namespace {
void check_linear_shapes(const Tensor& x, const Param& weight, const Param& bias) {
  if (weight.dims.size() != 2 || static_cast<std::size_t>(weight.dims[1]) != x.sample_size())
    fail(ErrorKind::invalid_argument, "linear " + weight.name + " expects " +
                                          (weight.dims.size() == 2 ? std::to_string(weight.dims[1]) : "?") +
                                          " inputs, got " + std::to_string(x.sample_size()));
  if (bias.size() != static_cast<std::size_t>(weight.dims[0]))
    fail(ErrorKind::invalid_argument, "linear bias " + bias.name + " does not match outputs");
}
}  // namespace

Tensor linear_forward(const Tensor& x, const Param& weight, const Param& bias) {
  check_linear_shapes(x, weight, bias);
  const int out = weight.dims[0], in = weight.dims[1];
  Tensor y(x.n, out);
  ConstMapMatrix xm(x.v.data(), x.n, in);
  ConstMapMatrix wm(weight.value.data(), out, in);
  MapMatrix ym(y.v.data(), x.n, out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value.data(), out);
  check_finite(y, "linear");
  return y;
}

Tensor linear_backward(const Tensor& x, const Param& weight, const Tensor& dy, Param& dweight,
                       Param& dbias, bool input_grad) {
  check_linear_shapes(x, weight, dbias);
  const int out = weight.dims[0], in = weight.dims[1];
  if (dy.n != x.n || dy.sample_size() != static_cast<std::size_t>(out))
    fail(ErrorKind::invalid_argument, "linear upstream gradient shape mismatch");
  ConstMapMatrix xm(x.v.data(), x.n, in);
  ConstMapMatrix dym(dy.v.data(), x.n, out);
  MapMatrix(dweight.value.data(), out, in).noalias() += dym.transpose() * xm;
  Eigen::Map<Eigen::RowVectorXd>(dbias.value.data(), out) += dym.colwise().sum();
  Tensor dx;
  if (input_grad) {
    dx = Tensor(x.n, x.c, x.h, x.w);
    MapMatrix(dx.v.data(), x.n, in).noalias() =
        dym * ConstMapMatrix(weight.value.data(), out, in);
  }
  return dx;
}

void SgdConfig::validate() const {
  require(learning_rate > 0, "learning_rate must be > 0");
  require(factor > 0 && factor <= 1, "lr_factor must be in (0, 1]");
  require(batch_size >= 1, "batch_size must be >= 1");
}

double learning_rate_at(const SgdConfig& config, int epoch) {
  double lr = config.learning_rate;
  for (int m : config.milestones)
    if (m <= epoch) lr *= config.factor;
  return lr;
}

void sgd_step(ParamSet& params, const ParamSet& grads, int epoch, const SgdConfig& config) {
  if (params.size() != grads.size()) fail(ErrorKind::invalid_argument, "sgd: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size())
      fail(ErrorKind::invalid_argument, "sgd: shape mismatch for " + params[i].name);
    for (double g : grads[i].value)
      if (!std::isfinite(g)) fail(ErrorKind::numeric, "divergence: non-finite gradient in " + grads[i].name);
  }
  const double lr = learning_rate_at(config, epoch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    const auto& g = grads[i].value;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> point, std::span<const double> analytic,
                           double tolerance, double h) {
  require(point.size() == analytic.size(), "grad_check: gradient size mismatch");
  GradCheckReport report;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double rel_err =
        abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error) {
      report.max_rel_error = rel_err;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace pclnet
