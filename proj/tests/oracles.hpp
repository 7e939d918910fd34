#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's numeric kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <deque>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using M3 = std::array<std::array<cd, 3>, 3>;

inline M3 hermitian(const std::array<double, 9>& s) {
  M3 m{};
  m[0][0] = s[0];
  m[1][1] = s[1];
  m[2][2] = s[2];
  m[0][1] = {s[3], s[4]};
  m[0][2] = {s[5], s[6]};
  m[1][2] = {s[7], s[8]};
  m[1][0] = std::conj(m[0][1]);
  m[2][0] = std::conj(m[0][2]);
  m[2][1] = std::conj(m[1][2]);
  return m;
}

inline cd det3(const M3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

/// Inverse by the adjugate (cofactor) formula.
inline M3 cofactor_inverse(const M3& a) {
  const cd det = det3(a);
  M3 inv{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
    }
  return inv;
}

inline double trace_product(const M3& a, const M3& b) {
  cd s = 0;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][i];
  return s.real();
}

inline double revised_wishart(const std::array<double, 9>& t, const std::array<double, 9>& v) {
  const M3 a = hermitian(t), b = hermitian(v);
  return 0.5 * (trace_product(a, cofactor_inverse(b)) + trace_product(b, cofactor_inverse(a))) - 3.0;
}

/// Random well-conditioned PSD matrix in stored form: G G^H + eps I.
template <class Rng>
std::array<double, 9> random_psd(Rng& rng, double ridge = 0.05) {
  std::normal_distribution<double> g(0.0, 1.0);
  cd k[3][3];
  for (auto& row : k)
    for (auto& x : row) x = {g(rng), g(rng)};
  M3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cd s = 0;
      for (int l = 0; l < 3; ++l) s += k[i][l] * std::conj(k[j][l]);
      m[i][j] = s;
    }
  return {m[0][0].real() + ridge, m[1][1].real() + ridge, m[2][2].real() + ridge,
          m[0][1].real(),         m[0][1].imag(),         m[0][2].real(),
          m[0][2].imag(),         m[1][2].real(),         m[1][2].imag()};
}

/// Straightforward max-edge pruning over a dense affinity matrix, one fair
/// coin (top bit of a 64-bit draw) per removal; true drops the second endpoint.
template <class Rng>
std::vector<std::size_t> prune(const std::vector<std::vector<double>>& a, std::size_t keep, Rng& rng) {
  std::vector<std::size_t> alive(a.size());
  std::iota(alive.begin(), alive.end(), 0);
  while (alive.size() > keep && alive.size() > 1) {
    std::size_t bp = 0, bq = 1;
    double best = -1;
    for (std::size_t i = 0; i < alive.size(); ++i)
      for (std::size_t j = i + 1; j < alive.size(); ++j)
        if (a[alive[i]][alive[j]] > best) {
          best = a[alive[i]][alive[j]];
          bp = i;
          bq = j;
        }
    const bool drop_q = (rng() >> 63) != 0;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(drop_q ? bq : bp));
  }
  return alive;
}

/// Batch FIFO reference: rows appended, oldest rows dropped past capacity.
struct FifoModel {
  std::size_t capacity;
  std::deque<std::vector<double>> rows;

  void push_batch(const std::vector<std::vector<double>>& batch) {
    for (const auto& r : batch) rows.push_back(r);
    while (rows.size() > capacity) rows.pop_front();
  }
};

/// Naive InfoNCE summed over anchors.
inline double info_nce(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& p,
                       const std::vector<std::vector<double>>& k, double tau) {
  auto cosine = [](const std::vector<double>& x, const std::vector<double>& y) {
    double xy = 0, xx = 0, yy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xy += x[i] * y[i];
      xx += x[i] * x[i];
      yy += y[i] * y[i];
    }
    return xy / std::sqrt(xx * yy);
  };
  double loss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double num = std::exp(cosine(a[i], p[i]) / tau);
    double den = num;
    for (const auto& kj : k) den += std::exp(cosine(a[i], kj) / tau);
    loss -= std::log(num / den);
  }
  return loss;
}

struct Metrics {
  double oa = 0, aa = 0, kappa = 0;
};

/// OA, AA over classes present in the truth, and kappa written as
/// (N sum n_ii - sum r_i c_i) / (N^2 - sum r_i c_i).
inline Metrics metrics(const std::vector<std::vector<std::uint64_t>>& cm) {
  const std::size_t c = cm.size();
  double n = 0, diag = 0, chance = 0, recall_sum = 0;
  int present = 0;
  std::vector<double> rows(c, 0), cols(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double v = static_cast<double>(cm[i][j]);
      rows[i] += v;
      cols[j] += v;
      n += v;
      if (i == j) diag += v;
    }
  for (std::size_t i = 0; i < c; ++i) {
    chance += rows[i] * cols[i];
    if (rows[i] > 0) {
      recall_sum += static_cast<double>(cm[i][i]) / rows[i];
      ++present;
    }
  }
  Metrics m;
  m.oa = diag / n;
  m.aa = recall_sum / present;
  const double denom = n * n - chance;
  m.kappa = denom == 0 ? (diag == n ? 1.0 : 0.0) : (n * diag - chance) / denom;
  return m;
}

/// Best agreement over all label permutations (small K).
inline double permutation_agreement(const std::vector<int>& truth, const std::vector<int>& found, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (perm[static_cast<std::size_t>(found[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace oracle
