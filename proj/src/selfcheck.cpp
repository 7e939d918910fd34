#include "pclnet/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <Eigen/Cholesky>

#include "pclnet/contrastive.hpp"
#include "pclnet/error.hpp"
#include "pclnet/wishart.hpp"

namespace pclnet {

namespace {

constexpr double kGradTol = 1e-4;

struct Checker {
  const SelfcheckLog& log;
  bool ok = true;

  void report(const std::string& name, bool passed, const std::string& detail) {
    ok = ok && passed;
    if (log) log((passed ? "PASS " : "FAIL ") + name + " " + detail);
  }

  void grad(const std::string& name, const std::function<double(std::span<const double>)>& f,
            const std::vector<double>& point, const std::vector<double>& analytic) {
    const GradCheckReport r = grad_check(f, point, analytic, kGradTol);
    char buf[128];
    std::snprintf(buf, sizeof buf, "max_rel=%.3e max_abs=%.3e n=%zu", r.max_rel_error,
                  r.max_abs_error, point.size());
    report(name, r.passed, buf);
  }
};

std::vector<double> normal_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  t.v = normal_values(t.size(), rng);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_conv(Checker& c, Rng& rng) {
  const Tensor x = random_tensor(2, 3, 6, 5, rng);
  Param w = kaiming_uniform("w", {4, 3, 3, 3}, 27, rng);
  Param b{"b", {4}, normal_values(4, rng, 0.1)};
  const Tensor r = random_tensor(2, 4, 6, 5, rng);

  Param dw = zero_param("w", w.dims), db = zero_param("b", b.dims);
  const Tensor dx = conv2d_backward(x, w, r, dw, db);

  c.grad("grad conv2d.input", [&](std::span<const double> p) {
    Tensor xp = x;
    xp.v.assign(p.begin(), p.end());
    return dot(conv2d_forward(xp, w, b).v, r.v);
  }, x.v, dx.v);
  c.grad("grad conv2d.weight", [&](std::span<const double> p) {
    Param wp = w;
    wp.value.assign(p.begin(), p.end());
    return dot(conv2d_forward(x, wp, b).v, r.v);
  }, w.value, dw.value);
  c.grad("grad conv2d.bias", [&](std::span<const double> p) {
    Param bp = b;
    bp.value.assign(p.begin(), p.end());
    return dot(conv2d_forward(x, w, bp).v, r.v);
  }, b.value, db.value);
}

void check_relu(Checker& c, Rng& rng) {
  Tensor x = random_tensor(2, 3, 4, 4, rng);
  for (auto& v : x.v)
    if (std::abs(v) < 1e-3) v = v < 0 ? -0.5 : 0.5;
  const Tensor r = random_tensor(2, 3, 4, 4, rng);
  const Tensor dx = relu_backward(relu_forward(x), r);
  c.grad("grad relu", [&](std::span<const double> p) {
    Tensor xp = x;
    xp.v.assign(p.begin(), p.end());
    return dot(relu_forward(xp).v, r.v);
  }, x.v, dx.v);
}

void check_maxpool(Checker& c, Rng& rng) {
  // Distinct values spaced 0.01 apart plus small jitter keep every window's
  // maximum unique under the finite-difference step.
  Tensor x(2, 2, 6, 6);
  std::vector<std::size_t> perm(x.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  std::uniform_real_distribution<double> jitter(0.0, 0.002);
  for (std::size_t i = 0; i < x.size(); ++i) x.v[i] = 0.01 * static_cast<double>(perm[i]) + jitter(rng);
  const Tensor r = random_tensor(2, 2, 3, 3, rng);
  const PoolResult pool = maxpool2_forward(x);
  const Tensor dx = maxpool2_backward(x, pool.argmax, r);
  c.grad("grad maxpool", [&](std::span<const double> p) {
    Tensor xp = x;
    xp.v.assign(p.begin(), p.end());
    return dot(maxpool2_forward(xp).y.v, r.v);
  }, x.v, dx.v);
}

void check_gap(Checker& c, Rng& rng) {
  const Tensor x = random_tensor(2, 3, 5, 4, rng);
  const Tensor r = random_tensor(2, 3, 1, 1, rng);
  const Tensor dx = gap_backward(x, r);
  c.grad("grad gap", [&](std::span<const double> p) {
    Tensor xp = x;
    xp.v.assign(p.begin(), p.end());
    return dot(gap_forward(xp).v, r.v);
  }, x.v, dx.v);
}

void check_linear(Checker& c, Rng& rng) {
  const Tensor x = random_tensor(3, 5, 1, 1, rng);
  Param w = kaiming_uniform("w", {4, 5}, 5, rng);
  Param b{"b", {4}, normal_values(4, rng, 0.1)};
  const Tensor r = random_tensor(3, 4, 1, 1, rng);
  Param dw = zero_param("w", w.dims), db = zero_param("b", b.dims);
  const Tensor dx = linear_backward(x, w, r, dw, db);
  c.grad("grad linear.input", [&](std::span<const double> p) {
    Tensor xp = x;
    xp.v.assign(p.begin(), p.end());
    return dot(linear_forward(xp, w, b).v, r.v);
  }, x.v, dx.v);
  c.grad("grad linear.weight", [&](std::span<const double> p) {
    Param wp = w;
    wp.value.assign(p.begin(), p.end());
    return dot(linear_forward(x, wp, b).v, r.v);
  }, w.value, dw.value);
  c.grad("grad linear.bias", [&](std::span<const double> p) {
    Param bp = b;
    bp.value.assign(p.begin(), p.end());
    return dot(linear_forward(x, w, bp).v, r.v);
  }, b.value, db.value);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  const auto v = normal_values(static_cast<std::size_t>(rows * cols), rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = v[static_cast<std::size_t>(i)];
  return m;
}

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

void check_info_nce_grad(Checker& c, Rng& rng) {
  const Matrix a = random_matrix(3, 6, rng), p = random_matrix(3, 6, rng), k = random_matrix(7, 6, rng);
  const InfoNceResult r = info_nce(a, p, k, 0.4);
  c.grad("grad infonce.anchor", [&](std::span<const double> v) {
    Matrix ap = Eigen::Map<const Matrix>(v.data(), a.rows(), a.cols());
    return info_nce(ap, p, k, 0.4).loss;
  }, flat(a), flat(r.d_anchor));
  c.grad("grad infonce.positive", [&](std::span<const double> v) {
    Matrix pp = Eigen::Map<const Matrix>(v.data(), p.rows(), p.cols());
    return info_nce(a, pp, k, 0.4).loss;
  }, flat(p), flat(r.d_positive));
}

// Activation pattern of the main encoder: ReLU masks, pooling winners and
// head ReLU mask. Finite differences are only meaningful where it is constant.
std::vector<std::uint32_t> pattern(const EncoderState& s, const Tensor& x) {
  ConvCache cc;
  HeadCache hc;
  projection_head_forward(s.head, conv_encoder_forward(s.conv, x, &cc), &hc);
  std::vector<std::uint32_t> sig;
  for (const auto& a : cc.activations)
    for (double v : a.v) sig.push_back(v > 0);
  for (const auto& am : cc.argmax) sig.insert(sig.end(), am.begin(), am.end());
  for (double v : hc.hidden_pre.v) sig.push_back(v > 0);
  return sig;
}

void check_end_to_end(Checker& c, std::uint64_t seed) {
  EncoderPlan plan;
  plan.conv_channels = {4, 6, 8};
  plan.head_dims = {8, 5};
  EncoderState s = EncoderState::initialize(plan, seed);
  Rng rng = substream(seed, "selfcheck.e2e");
  // The auxiliary encoder differs from the main one, as it does mid-training.
  for (auto* set : {&s.conv_aux, &s.head_aux})
    for (auto& p : *set)
      for (auto& v : p.value) v += 0.05 * normal_values(1, rng)[0];
  for (auto& p : s.head)
    if (p.dims.size() == 1)
      for (auto& v : p.value) v = 0.1 * normal_values(1, rng)[0];

  const Tensor x = random_tensor(3, kPolChannels, 15, 15, rng);
  Tensor xp(x.n, x.c, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    const double* src = x.sample(i);
    double* dst = xp.sample(i);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < x.c; ++ch)
      for (std::size_t k = 0; k < plane; ++k) dst[ch * plane + k] = src[ch * plane + plane - 1 - k];
  }
  const Matrix bank = random_matrix(6, plan.output_dim(), rng);
  const double tau = 0.4;
  const StepGradients g = contrastive_step_gradients(s, x, xp, bank, tau);
  const auto base = pattern(s, x);

  const EncoderState aux_before = s;
  const Matrix bank_before = bank;

  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  const double h = 1e-4;
  auto sweep = [&](ParamSet& params, const ParamSet& grads) {
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (std::size_t k = 0; k < params[pi].size(); ++k) {
        double& w = params[pi].value[k];
        const double w0 = w;
        w = w0 + h;
        const double fp = contrastive_step_gradients(s, x, xp, bank, tau).loss;
        const bool same_p = pattern(s, x) == base;
        w = w0 - h;
        const double fm = contrastive_step_gradients(s, x, xp, bank, tau).loss;
        const bool same_m = pattern(s, x) == base;
        w = w0;
        if (!same_p || !same_m) {
          ++skipped;
          continue;
        }
        const double num = (fp - fm) / (2 * h);
        const double an = grads[pi].value[k];
        const double rel = std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6});
        worst = std::max(worst, rel);
        ++checked;
      }
    }
  };
  sweep(s.conv, g.d_conv);
  sweep(s.head, g.d_head);

  char buf[128];
  std::snprintf(buf, sizeof buf, "max_rel=%.3e checked=%zu nonsmooth_skipped=%zu", worst, checked,
                skipped);
  c.report("grad encoder+infonce", worst <= kGradTol && checked > 0 && skipped * 10 < checked, buf);

  const bool aux_untouched = s.conv_aux == aux_before.conv_aux && s.head_aux == aux_before.head_aux;
  const bool bank_untouched = bank == bank_before;
  const bool grads_main_only = g.d_conv.size() == s.conv.size() && g.d_head.size() == s.head.size();
  c.report("no gradient to auxiliary encoder or bank", aux_untouched && bank_untouched && grads_main_only,
           "aux and bank unchanged, gradients cover main parameters only");
}

CoherencyMatrix random_psd(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Matrix3cd a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = {g(rng), g(rng)};
  return CoherencyMatrix::from_matrix(a * a.adjoint() + 0.1 * Eigen::Matrix3cd::Identity());
}

void check_distance_oracle(Checker& c, Rng& rng) {
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const CoherencyMatrix p = random_psd(rng), q = random_psd(rng);
    const Eigen::Matrix3cd a = p.matrix(), b = q.matrix();
    const Eigen::Matrix3cd ia = a.ldlt().solve(Eigen::Matrix3cd::Identity());
    const Eigen::Matrix3cd ib = b.ldlt().solve(Eigen::Matrix3cd::Identity());
    const double ref = 0.5 * (a * ib + b * ia).trace().real() - 3.0;
    const double d = revised_wishart_distance(p, q);
    worst = std::max(worst, std::abs(d - ref) / std::max(1.0, std::abs(ref)));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max_rel=%.3e pairs=200", worst);
  c.report("oracle wishart distance", worst <= 1e-10, buf);
}

double brute_info_nce(const Matrix& a, const Matrix& p, const Matrix& k, double tau) {
  double loss = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double sp = a.row(i).dot(p.row(i)) / (a.row(i).norm() * p.row(i).norm()) / tau;
    double denom = std::exp(sp);
    for (Eigen::Index j = 0; j < k.rows(); ++j)
      denom += std::exp(a.row(i).dot(k.row(j)) / (a.row(i).norm() * k.row(j).norm()) / tau);
    loss += -std::log(std::exp(sp) / denom);
  }
  return loss;
}

void check_info_nce_oracle(Checker& c, Rng& rng) {
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 4));
    const auto kk = static_cast<Eigen::Index>(uniform_index(rng, 17));
    const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 8));
    const Matrix a = random_matrix(n, d, rng), p = random_matrix(n, d, rng), k = random_matrix(kk, d, rng);
    worst = std::max(worst, std::abs(info_nce(a, p, k, 0.4).loss - brute_info_nce(a, p, k, 0.4)));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max_abs=%.3e instances=100", worst);
  c.report("oracle infonce", worst <= 1e-10, buf);
}

}  // namespace

bool run_selfcheck(const SelfcheckLog& log, std::uint64_t seed) {
  Checker c{log};
  Rng rng = substream(seed, "selfcheck");
  try {
    check_conv(c, rng);
    check_relu(c, rng);
    check_maxpool(c, rng);
    check_gap(c, rng);
    check_linear(c, rng);
    check_info_nce_grad(c, rng);
    check_end_to_end(c, seed);
    check_distance_oracle(c, rng);
    check_info_nce_oracle(c, rng);
  } catch (const Error& e) {
    c.report("selfcheck", false, std::string("aborted: ") + e.what());
  }
  return c.ok;
}

}  // namespace pclnet
