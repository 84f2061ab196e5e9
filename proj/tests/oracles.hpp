#pragma once

// Reference implementations used only by tests. Each one is written from the
// definition, in the most direct form, and shares no code with src/.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "framescope/splitmix.hpp"
#include "framescope/tensor.hpp"

namespace oracle {

using framescope::Tensor;
using framescope::Tensor64;

template <typename T>
Tensor<T> random(framescope::SplitMix64& rng, framescope::Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T s = 0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
  return c;
}

inline std::vector<double> softmax(std::vector<double> row) {
  double mx = -INFINITY;
  for (double v : row) mx = std::max(mx, v);
  double sum = 0;
  for (double& v : row) sum += (v = std::exp(v - mx));
  for (double& v : row) v /= sum;
  return row;
}

// Brute force: average every input cell whose index falls in the region.
inline Tensor64 adaptive_pool(const Tensor64& x, std::size_t oh, std::size_t ow) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor64 out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const double r0 = std::floor(double(i) * h / oh), r1 = std::ceil(double(i + 1) * h / oh);
        const double c0 = std::floor(double(j) * w / ow), c1 = std::ceil(double(j + 1) * w / ow);
        double sum = 0;
        int count = 0;
        for (std::size_t r = 0; r < h; ++r)
          for (std::size_t q = 0; q < w; ++q)
            if (r >= r0 && r < r1 && q >= c0 && q < c1) {
              sum += x[(ch * h + r) * w + q];
              ++count;
            }
        out[(ch * oh + i) * ow + j] = sum / count;
      }
  return out;
}

// Direct convolution with explicit padding checks.
inline Tensor64 depthwise_conv(const Tensor64& x, const Tensor64& kernel, const Tensor64& bias) {
  const long c = long(x.dim(0)), h = long(x.dim(1)), w = long(x.dim(2));
  Tensor64 out(x.shape());
  for (long ch = 0; ch < c; ++ch)
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        double s = bias[std::size_t(ch)];
        for (long di = -1; di <= 1; ++di)
          for (long dj = -1; dj <= 1; ++dj) {
            const long r = i + di, q = j + dj;
            if (r < 0 || r >= h || q < 0 || q >= w) continue;
            s += kernel[std::size_t(ch * 9 + (di + 1) * 3 + (dj + 1))] * x[std::size_t((ch * h + r) * w + q)];
          }
        out[std::size_t((ch * h + i) * w + j)] = s;
      }
  return out;
}

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

// One token at a time: y = W2^T gelu(W1^T x + b1) + b2.
inline std::vector<double> ffn_token(const std::vector<double>& x, const Tensor64& w1, const Tensor64& b1,
                                     const Tensor64& w2, const Tensor64& b2) {
  const std::size_t in = w1.dim(0), hid = w1.dim(1), out = w2.dim(1);
  std::vector<double> h(hid), y(out);
  for (std::size_t j = 0; j < hid; ++j) {
    double s = b1[j];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * w1[i * hid + j];
    h[j] = gelu(s);
  }
  for (std::size_t j = 0; j < out; ++j) {
    double s = b2[j];
    for (std::size_t i = 0; i < hid; ++i) s += h[i] * w2[i * out + j];
    y[j] = s;
  }
  return y;
}

// Frame scores straight from the definition: full S x S attention, column
// sums, per-frame totals.
inline std::vector<double> frame_scores(const Tensor<float>& f) {
  const std::size_t t = f.dim(0), per = f.dim(1) * f.dim(2), d = f.dim(3), s = t * per;
  std::vector<double> received(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    std::vector<double> row(s);
    for (std::size_t j = 0; j < s; ++j) {
      double dot = 0;
      for (std::size_t l = 0; l < d; ++l) dot += double(f[i * d + l]) * double(f[j * d + l]);
      row[j] = dot / std::sqrt(double(d));
    }
    row = softmax(row);
    for (std::size_t j = 0; j < s; ++j) received[j] += row[j];
  }
  std::vector<double> scores(t, 0.0);
  for (std::size_t j = 0; j < s; ++j) scores[j / per] += received[j];
  return scores;
}

// Stable sort by descending score; equal scores keep ascending index order.
inline std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Central differences of a scalar function w.r.t. every element of `t`.
inline std::vector<double> central_diff(Tensor64& t, const std::function<double()>& f, double h = 1e-4) {
  std::vector<double> g(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double orig = t[i];
    t[i] = orig + h;
    const double up = f();
    t[i] = orig - h;
    const double down = f();
    t[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double rel_error(const Tensor64& a, const std::vector<double>& n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

inline double sum_sq(const Tensor64& y) {
  double s = 0;
  for (double v : y.data()) s += v * v;
  return s;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace oracle
