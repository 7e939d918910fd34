#include "pclnet/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "pclnet/error.hpp"
#include "pclnet/parallel.hpp"

namespace pclnet {

namespace {
constexpr std::size_t kBatchGrain = 16;

double row_norm(const double* v, Eigen::Index d) {
  const double n = Eigen::Map<const Eigen::VectorXd>(v, d).norm();
  if (!(n > 0) || !std::isfinite(n)) fail(ErrorKind::numeric, "degenerate representation");
  return n;
}
}  // namespace

Matrix to_matrix(const Tensor& t) {
  return Eigen::Map<const Matrix>(t.v.data(), t.n, static_cast<Eigen::Index>(t.sample_size()));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine similarity needs equal-length vectors");
  const auto d = static_cast<Eigen::Index>(a.size());
  const double na = row_norm(a.data(), d);
  const double nb = row_norm(b.data(), d);
  const double dot = Eigen::Map<const Eigen::VectorXd>(a.data(), d)
                         .dot(Eigen::Map<const Eigen::VectorXd>(b.data(), d));
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

InfoNceResult info_nce(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                       double temperature) {
  require(temperature > 0, "temperature must be > 0");
  require(anchors.rows() == positives.rows() && anchors.cols() == positives.cols(),
          "anchors and positives must have the same shape");
  require(negatives.rows() == 0 || negatives.cols() == anchors.cols(),
          "negatives must have the representation dimension");
  const Eigen::Index n = anchors.rows(), d = anchors.cols(), k = negatives.rows();

  Eigen::VectorXd anchor_norm(n), positive_norm(n);
  Matrix a_hat(n, d), p_hat(n, d), b_hat(k, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    anchor_norm(i) = row_norm(anchors.row(i).data(), d);
    positive_norm(i) = row_norm(positives.row(i).data(), d);
    a_hat.row(i) = anchors.row(i) / anchor_norm(i);
    p_hat.row(i) = positives.row(i) / positive_norm(i);
  }
  for (Eigen::Index j = 0; j < k; ++j) b_hat.row(j) = negatives.row(j) / row_norm(negatives.row(j).data(), d);

  const Eigen::VectorXd pos_cos = (a_hat.cwiseProduct(p_hat)).rowwise().sum();
  const Matrix neg_cos = a_hat * b_hat.transpose();  // n x k

  InfoNceResult r;
  r.d_anchor = Matrix::Zero(n, d);
  r.d_positive = Matrix::Zero(n, d);
  const double inv_t = 1.0 / temperature;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sp = pos_cos(i) * inv_t;
    double top = sp;
    for (Eigen::Index j = 0; j < k; ++j) top = std::max(top, neg_cos(i, j) * inv_t);
    double z = std::exp(sp - top);
    Eigen::RowVectorXd weights(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      weights(j) = std::exp(neg_cos(i, j) * inv_t - top);
      z += weights(j);
    }
    r.loss += std::log(z) - (sp - top);

    const double pi_pos = std::exp(sp - top) / z;
    weights /= z;
    // d cos(a, b) / da = (b_hat - cos * a_hat) / |a|
    const double neg_mass_cos = k > 0 ? weights.dot(neg_cos.row(i)) : 0.0;
    Eigen::RowVectorXd grad_a = (pi_pos - 1.0) * (p_hat.row(i) - pos_cos(i) * a_hat.row(i));
    if (k > 0) grad_a += weights * b_hat - neg_mass_cos * a_hat.row(i);
    r.d_anchor.row(i) = grad_a * (inv_t / anchor_norm(i));
    r.d_positive.row(i) = (pi_pos - 1.0) * (a_hat.row(i) - pos_cos(i) * p_hat.row(i)) *
                          (inv_t / positive_norm(i));
  }
  if (!std::isfinite(r.loss)) fail(ErrorKind::numeric, "non-finite InfoNCE loss");
  return r;
}

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "memory bank capacity must be >= 1");
}

void MemoryBank::enqueue(const Matrix& batch) {
  const auto rows = static_cast<std::size_t>(batch.rows());
  require(rows >= 1, "cannot enqueue an empty batch");
  if (batch_size_ == 0) {
    if (capacity_ % rows != 0)
      fail(ErrorKind::invalid_argument, "batch size " + std::to_string(rows) +
                                            " does not divide bank capacity " +
                                            std::to_string(capacity_));
    batch_size_ = rows;
  } else if (rows != batch_size_) {
    fail(ErrorKind::state, "batch size changed mid-run (" + std::to_string(batch_size_) +
                               " -> " + std::to_string(rows) + ")");
  } else if (!batches_.empty() && batch.cols() != batches_.front().cols()) {
    fail(ErrorKind::state, "representation dimension changed mid-run");
  }
  batches_.push_back(batch);
  while (size() > capacity_) batches_.pop_front();
}

std::size_t MemoryBank::size() const { return batches_.size() * batch_size_; }

Matrix MemoryBank::entries() const {
  if (batches_.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(size()), batches_.front().cols());
  Eigen::Index row = 0;
  for (const auto& b : batches_) {
    out.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  return out;
}

EncoderState EncoderState::initialize(const EncoderPlan& plan, std::uint64_t seed) {
  Rng rng = substream(seed, "encoder.init");
  EncoderState s;
  s.conv = init_conv_encoder(plan, rng);
  s.head = init_projection_head(plan, rng);
  s.conv_aux = s.conv;
  s.head_aux = s.head;
  return s;
}

void momentum_update(ParamSet& aux, const ParamSet& main, double m) {
  require(m >= 0 && m <= 1, "momentum must be in [0, 1]");
  if (aux.size() != main.size()) fail(ErrorKind::invalid_argument, "momentum update: parameter count mismatch");
  for (std::size_t i = 0; i < aux.size(); ++i) {
    if (aux[i].size() != main[i].size())
      fail(ErrorKind::invalid_argument, "momentum update: shape mismatch for " + aux[i].name);
    for (std::size_t k = 0; k < aux[i].size(); ++k)
      aux[i].value[k] = m * aux[i].value[k] + (1.0 - m) * main[i].value[k];
  }
}

void momentum_update(EncoderState& state, double m) {
  momentum_update(state.conv_aux, state.conv, m);
  momentum_update(state.head_aux, state.head, m);
}

void PretrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(bank_size >= 1, "bank_size must be >= 1");
  require(bank_size % batch_size == 0, "bank_size must be a multiple of batch_size");
  require(momentum > 0 && momentum < 1, "momentum must be in (0, 1)");
  require(temperature > 0, "temperature must be > 0");
  sgd.validate();
}

std::vector<double> PretrainResult::epoch_mean_loss() const {
  std::vector<double> sums, counts;
  for (const auto& row : trace) {
    if (static_cast<std::size_t>(row.epoch) >= sums.size()) {
      sums.resize(static_cast<std::size_t>(row.epoch) + 1, 0.0);
      counts.resize(sums.size(), 0.0);
    }
    if (row.bank_fill == 0) continue;  // bank seeding step
    sums[static_cast<std::size_t>(row.epoch)] += row.loss;
    counts[static_cast<std::size_t>(row.epoch)] += 1;
  }
  for (std::size_t e = 0; e < sums.size(); ++e) sums[e] = counts[e] > 0 ? sums[e] / counts[e] : 0.0;
  return sums;
}

namespace {

Tensor slice(const Tensor& t, std::size_t begin, std::size_t end) {
  Tensor s(static_cast<int>(end - begin), t.c, t.h, t.w);
  std::copy(t.sample(static_cast<int>(begin)), t.sample(static_cast<int>(begin)) + s.size(),
            s.v.begin());
  return s;
}

Matrix encode_chunked(const ParamSet& conv, const ParamSet& head, const Tensor& x) {
  const auto n = static_cast<std::size_t>(x.n);
  Matrix out;
  std::vector<Tensor> parts(chunk_count(n, kBatchGrain));
  parallel_chunks(n, kBatchGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
    parts[c] = encode(conv, head, slice(x, b, e));
  });
  for (std::size_t c = 0; c < parts.size(); ++c) {
    const Matrix m = to_matrix(parts[c]);
    if (c == 0) out.resize(static_cast<Eigen::Index>(n), m.cols());
    out.middleRows(static_cast<Eigen::Index>(c * kBatchGrain), m.rows()) = m;
  }
  return out;
}

struct MainPass {
  Matrix o;
  std::vector<ConvCache> conv_caches;
  std::vector<HeadCache> head_caches;
};

MainPass forward_main(const EncoderState& state, const Tensor& x) {
  const auto n = static_cast<std::size_t>(x.n);
  const std::size_t chunks = chunk_count(n, kBatchGrain);
  MainPass pass;
  pass.conv_caches.resize(chunks);
  pass.head_caches.resize(chunks);
  std::vector<Tensor> parts(chunks);
  parallel_chunks(n, kBatchGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
    const Tensor h = conv_encoder_forward(state.conv, slice(x, b, e), &pass.conv_caches[c]);
    parts[c] = projection_head_forward(state.head, h, &pass.head_caches[c]);
  });
  pass.o.resize(static_cast<Eigen::Index>(n), parts[0].c);
  for (std::size_t c = 0; c < chunks; ++c)
    pass.o.middleRows(static_cast<Eigen::Index>(c * kBatchGrain), parts[c].n) = to_matrix(parts[c]);
  return pass;
}

// Backward per chunk; chunk gradients are summed in chunk order.
void backward_main(const EncoderState& state, const MainPass& pass, const Matrix& d_o,
                   ParamSet& d_conv, ParamSet& d_head) {
  const auto n = static_cast<std::size_t>(d_o.rows());
  const std::size_t chunks = chunk_count(n, kBatchGrain);
  std::vector<ParamSet> conv_parts(chunks, zeros_like(state.conv));
  std::vector<ParamSet> head_parts(chunks, zeros_like(state.head));
  parallel_chunks(n, kBatchGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
    Tensor g(static_cast<int>(e - b), static_cast<int>(d_o.cols()));
    Eigen::Map<Matrix>(g.v.data(), g.n, g.c) = d_o.middleRows(static_cast<Eigen::Index>(b), g.n);
    const Tensor dh = projection_head_backward(state.head, pass.head_caches[c], g, head_parts[c]);
    conv_encoder_backward(state.conv, pass.conv_caches[c], dh, conv_parts[c]);
  });
  d_conv = zeros_like(state.conv);
  d_head = zeros_like(state.head);
  auto accumulate = [](ParamSet& into, const ParamSet& part) {
    for (std::size_t i = 0; i < into.size(); ++i)
      for (std::size_t k = 0; k < into[i].size(); ++k) into[i].value[k] += part[i].value[k];
  };
  for (std::size_t c = 0; c < chunks; ++c) {
    accumulate(d_conv, conv_parts[c]);
    accumulate(d_head, head_parts[c]);
  }
}

}  // namespace

StepGradients contrastive_step_gradients(const EncoderState& state, const Tensor& anchors,
                                         const Tensor& positives, const Matrix& negatives,
                                         double temperature) {
  const Matrix o_pos = encode_chunked(state.conv_aux, state.head_aux, positives);
  const MainPass pass = forward_main(state, anchors);
  const InfoNceResult nce = info_nce(pass.o, o_pos, negatives, temperature);
  StepGradients g;
  const double scale = 1.0 / static_cast<double>(anchors.n);
  g.loss = nce.loss * scale;
  backward_main(state, pass, nce.d_anchor * scale, g.d_conv, g.d_head);
  return g;
}

PretrainResult pretrain(const PretrainDataset& dataset, const ChannelStats& stats,
                        const PretrainConfig& config, const PretrainProgress& progress) {
  config.validate();
  require(dataset.size() > 0, "pretraining dataset is empty");

  PretrainResult result;
  result.state = EncoderState::initialize(config.plan, config.seed);
  EncoderState& state = result.state;
  MemoryBank bank(static_cast<std::size_t>(config.bank_size));
  Rng shuffle = substream(config.seed, "pretrain.shuffle");

  const std::size_t d = dataset.size();
  const auto n = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps = (d + n - 1) / n;
  std::vector<std::size_t> order(d);
  std::vector<std::size_t> batch(n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = d; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);
    const double lr = learning_rate_at(config.sgd, epoch);

    for (std::size_t step = 0; step < steps; ++step) {
      for (std::size_t b = 0; b < n; ++b) batch[b] = order[(step * n + b) % d];
      const Tensor x = make_batch(dataset.samples, batch, stats);
      const Tensor x_pos = make_batch(dataset.samples, batch, stats, /*rotate=*/true);

      TraceRow row{epoch, static_cast<int>(step), 0.0, lr, bank.size()};
      const Matrix o_pos = encode_chunked(state.conv_aux, state.head_aux, x_pos);
      if (bank.size() > 0) {
        const MainPass pass = forward_main(state, x);
        const InfoNceResult nce = info_nce(pass.o, o_pos, bank.entries(), config.temperature);
        const double scale = 1.0 / static_cast<double>(n);
        row.loss = nce.loss * scale;
        if (!std::isfinite(row.loss))
          fail(ErrorKind::numeric, "divergence at epoch " + std::to_string(epoch) + " step " +
                                       std::to_string(step));
        ParamSet d_conv, d_head;
        backward_main(state, pass, nce.d_anchor * scale, d_conv, d_head);
        try {
          sgd_step(state.conv, d_conv, epoch, config.sgd);
          sgd_step(state.head, d_head, epoch, config.sgd);
        } catch (const Error& e) {
          fail(e.kind(), std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                             " step " + std::to_string(step));
        }
        momentum_update(state, config.momentum);
      }
      bank.enqueue(o_pos);
      result.trace.push_back(row);
      if (progress) progress(row);
    }
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "epoch,step,loss,learning_rate,bank_fill\n";
  char buf[96];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%zu\n", r.epoch, r.step, r.loss,
                  r.learning_rate, r.bank_fill);
    out << buf;
  }
}

}  // namespace pclnet
