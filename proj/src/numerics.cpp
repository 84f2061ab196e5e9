#include "framescope/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace framescope {

namespace {

std::atomic<std::uint64_t> g_mac_counter{0};

template <Real T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_str(t.shape()));
  }
}

// C (m x n) = A (m x k) * B (k x n), starting from zero and accumulating over k
// in ascending order for every output element.
template <Real T>
void gemm_into(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const T av = arow[l];
      const T* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

std::uint64_t mac_count() { return g_mac_counter.load(std::memory_order_relaxed); }
void reset_mac_counter() { g_mac_counter.store(0, std::memory_order_relaxed); }
void add_macs(std::uint64_t n) { g_mac_counter.fetch_add(n, std::memory_order_relaxed); }

std::uint64_t matmul_macs(std::uint64_t m, std::uint64_t k, std::uint64_t n) { return m * k * n; }
std::uint64_t pool_macs(std::uint64_t channels, std::uint64_t out_h, std::uint64_t out_w) {
  return channels * out_h * out_w;
}
std::uint64_t conv3x3_macs(std::uint64_t channels, std::uint64_t h, std::uint64_t w) {
  return channels * (3 * h - 2) * (3 * w - 2);
}

template <Real T>
void LinearParams<T>::validate() const {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
    throw ShapeError("linear params: weight " + shape_str(weight.shape()) + " and bias " +
                     shape_str(bias.shape()) + " are inconsistent");
  }
}

template <Real T>
void ConvParams<T>::validate() const {
  if (kernel.rank() != 3 || kernel.dim(1) != 3 || kernel.dim(2) != 3) {
    throw ShapeError("conv params: kernel must be C x 3 x 3, got " + shape_str(kernel.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0)) {
    throw ShapeError("conv params: bias " + shape_str(bias.shape()) + " does not match kernel " +
                     shape_str(kernel.shape()));
  }
}

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul", "A");
  require_rank(b, 2, "matmul", "B");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ, A " + shape_str(a.shape()) + " vs B " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  gemm_into(a.data().data(), b.data().data(), c.data().data(), m, k, n);
  add_macs(matmul_macs(m, k, n));
  return c;
}

template <Real T>
Tensor<T> transpose(const Tensor<T>& m) {
  require_rank(m, 2, "transpose", "input");
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
  return out;
}

template <Real T>
void softmax_inplace(std::span<T> row) {
  if (row.empty()) return;
  T mx = row[0];
  for (T v : row) mx = std::max(mx, v);
  T sum{0};
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const T inv = T{1} / sum;
  for (T& v : row) v *= inv;
}

template <Real T>
Tensor<T> softmax_rows(const Tensor<T>& m) {
  require_rank(m, 2, "softmax_rows", "input");
  const std::size_t cols = m.dim(1);
  Tensor<T> out = m;
  for (std::size_t i = 0; i < m.dim(0); ++i) softmax_inplace(out.data().subspan(i * cols, cols));
  return out;
}

template <Real T>
T gelu(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = static_cast<T>(0.044715);
  return T{0.5} * x * (T{1} + std::tanh(k * (x + c * x * x * x)));
}

template <Real T>
T gelu_derivative(T x) {
  constexpr T k = static_cast<T>(0.7978845608028654);
  constexpr T c = static_cast<T>(0.044715);
  const T th = std::tanh(k * (x + c * x * x * x));
  const T sech2 = T{1} - th * th;
  return T{0.5} * (T{1} + th) + T{0.5} * x * sech2 * k * (T{1} + T{3} * c * x * x);
}

namespace {

template <Real T>
Tensor<T> linear_impl(const Tensor<T>& x, const LinearParams<T>& p, bool counted) {
  p.validate();
  require_rank(x, 2, "linear", "input");
  if (x.dim(1) != p.in_features()) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(p.weight.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = p.out_features();
  Tensor<T> y({m, n});
  gemm_into(x.data().data(), p.weight.data().data(), y.data().data(), m, k, n);
  if (counted) add_macs(matmul_macs(m, k, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.at(i, j) += p.bias[j];
  return y;
}

// Forward recomputation inside backward passes stays out of the MAC counter.
template <Real T>
Tensor<T> linear_uncounted(const Tensor<T>& x, const LinearParams<T>& p) {
  return linear_impl(x, p, false);
}

}  // namespace

template <Real T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  return linear_impl(x, p, true);
}

namespace {

template <Real T>
void check_ffn(const Tensor<T>& x, const LinearParams<T>& p1, const LinearParams<T>& p2) {
  p1.validate();
  p2.validate();
  require_rank(x, 3, "ffn", "input");
  if (x.dim(2) != p1.in_features() || p1.out_features() != p2.in_features()) {
    throw ShapeError("ffn: input " + shape_str(x.shape()) + " incompatible with layers " +
                     shape_str(p1.weight.shape()) + " and " + shape_str(p2.weight.shape()));
  }
}

}  // namespace

template <Real T>
Tensor<T> ffn_forward(const Tensor<T>& x, const LinearParams<T>& p1, const LinearParams<T>& p2) {
  check_ffn(x, p1, p2);
  const std::size_t b = x.dim(0), n = x.dim(1);
  Tensor<T> h = linear(x.reshaped({b * n, x.dim(2)}), p1);
  for (auto& v : h.data()) v = gelu(v);
  return linear(h, p2).reshaped({b, n, p2.out_features()});
}

std::pair<std::size_t, std::size_t> pool_region(std::size_t i, std::size_t in, std::size_t out) {
  const std::size_t begin = (i * in) / out;
  const std::size_t end = ((i + 1) * in + out - 1) / out;
  return {begin, end};
}

template <Real T>
Tensor<T> adaptive_avg_pool2d(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "adaptive_avg_pool2d", "input");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h == 0 || out_w == 0) throw ArgumentError("adaptive_avg_pool2d: output size must be positive");
  if (out_h > h || out_w > w) {
    throw UnsupportedUpsampleError("adaptive_avg_pool2d: cannot pool " + std::to_string(h) + "x" +
                                   std::to_string(w) + " up to " + std::to_string(out_h) + "x" +
                                   std::to_string(out_w));
  }
  Tensor<T> out({c, out_h, out_w});
  const T* in = x.data().data();
  T* o = out.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* plane = in + ch * h * w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto [r0, r1] = pool_region(i, h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto [c0, c1] = pool_region(j, w, out_w);
        T sum{0};
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t q = c0; q < c1; ++q) sum += plane[r * w + q];
        *o++ = sum * (T{1} / static_cast<T>((r1 - r0) * (c1 - c0)));
      }
    }
  }
  add_macs(pool_macs(c, out_h, out_w));
  return out;
}

template <Real T>
Tensor<T> pool_grad(const Shape& input_shape, const Tensor<T>& upstream) {
  if (input_shape.size() != 3 || upstream.rank() != 3 || upstream.dim(0) != input_shape[0] ||
      upstream.dim(1) > input_shape[1] || upstream.dim(2) > input_shape[2]) {
    throw ShapeError("pool_grad: upstream " + shape_str(upstream.shape()) +
                     " does not match input shape " + shape_str(input_shape));
  }
  const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t out_h = upstream.dim(1), out_w = upstream.dim(2);
  Tensor<T> dx(input_shape);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T* plane = dx.data().data() + ch * h * w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto [r0, r1] = pool_region(i, h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto [c0, c1] = pool_region(j, w, out_w);
        const T g = upstream[(ch * out_h + i) * out_w + j] *
                    (T{1} / static_cast<T>((r1 - r0) * (c1 - c0)));
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t q = c0; q < c1; ++q) plane[r * w + q] += g;
      }
    }
  }
  return dx;
}

template <Real T>
Tensor<T> depthwise_conv3x3(const Tensor<T>& x, const ConvParams<T>& p) {
  p.validate();
  require_rank(x, 3, "depthwise_conv3x3", "input");
  if (x.dim(0) != p.channels()) {
    throw ShapeError("depthwise_conv3x3: input " + shape_str(x.shape()) + " has " +
                     std::to_string(x.dim(0)) + " channels but kernel " + shape_str(p.kernel.shape()) +
                     " has " + std::to_string(p.channels()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* in = x.data().data() + ch * h * w;
    const T* k = p.kernel.data().data() + ch * 9;
    T* o = out.data().data() + ch * h * w;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        T acc = p.bias[ch];
        for (std::size_t di = 0; di < 3; ++di) {
          if (i + di < 1 || i + di > h) continue;
          const std::size_t r = i + di - 1;
          for (std::size_t dj = 0; dj < 3; ++dj) {
            if (j + dj < 1 || j + dj > w) continue;
            acc += k[di * 3 + dj] * in[r * w + (j + dj - 1)];
          }
        }
        o[i * w + j] = acc;
      }
    }
  }
  add_macs(conv3x3_macs(c, h, w));
  return out;
}

template <Real T>
ConvGrads<T> conv_grad(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& upstream) {
  p.validate();
  require_rank(x, 3, "conv_grad", "input");
  if (x.dim(0) != p.channels() || upstream.shape() != x.shape()) {
    throw ShapeError("conv_grad: input " + shape_str(x.shape()) + ", kernel " +
                     shape_str(p.kernel.shape()) + " and upstream " + shape_str(upstream.shape()) +
                     " are inconsistent");
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  ConvGrads<T> g{Tensor<T>(x.shape()), {Tensor<T>(p.kernel.shape()), Tensor<T>(p.bias.shape())}};
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* in = x.data().data() + ch * h * w;
    const T* k = p.kernel.data().data() + ch * 9;
    const T* up = upstream.data().data() + ch * h * w;
    T* dx = g.input.data().data() + ch * h * w;
    T* dk = g.params.kernel.data().data() + ch * 9;
    T db{0};
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const T u = up[i * w + j];
        db += u;
        for (std::size_t di = 0; di < 3; ++di) {
          if (i + di < 1 || i + di > h) continue;
          const std::size_t r = i + di - 1;
          for (std::size_t dj = 0; dj < 3; ++dj) {
            if (j + dj < 1 || j + dj > w) continue;
            const std::size_t q = j + dj - 1;
            dk[di * 3 + dj] += u * in[r * w + q];
            dx[r * w + q] += u * k[di * 3 + dj];
          }
        }
      }
    }
    g.params.bias[ch] = db;
  }
  return g;
}

template <Real T>
MatmulGrads<T> matmul_grad(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& upstream) {
  require_rank(a, 2, "matmul_grad", "A");
  require_rank(b, 2, "matmul_grad", "B");
  require_rank(upstream, 2, "matmul_grad", "upstream");
  if (a.dim(1) != b.dim(0) || upstream.dim(0) != a.dim(0) || upstream.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_grad: A " + shape_str(a.shape()) + ", B " + shape_str(b.shape()) +
                     ", upstream " + shape_str(upstream.shape()) + " are inconsistent");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  MatmulGrads<T> g{Tensor<T>(a.shape()), Tensor<T>(b.shape())};
  const Tensor<T> bt = transpose(b);
  const Tensor<T> at = transpose(a);
  gemm_into(upstream.data().data(), bt.data().data(), g.a.data().data(), m, n, k);
  gemm_into(at.data().data(), upstream.data().data(), g.b.data().data(), k, m, n);
  return g;
}

template <Real T>
LinearGrads<T> linear_grad(const Tensor<T>& x, const LinearParams<T>& p, const Tensor<T>& upstream) {
  p.validate();
  require_rank(x, 2, "linear_grad", "input");
  if (x.dim(1) != p.in_features() || upstream.rank() != 2 || upstream.dim(0) != x.dim(0) ||
      upstream.dim(1) != p.out_features()) {
    throw ShapeError("linear_grad: input " + shape_str(x.shape()) + ", weight " +
                     shape_str(p.weight.shape()) + ", upstream " + shape_str(upstream.shape()) +
                     " are inconsistent");
  }
  MatmulGrads<T> mg = matmul_grad(x, p.weight, upstream);
  Tensor<T> db(p.bias.shape());
  for (std::size_t i = 0; i < upstream.dim(0); ++i)
    for (std::size_t j = 0; j < upstream.dim(1); ++j) db[j] += upstream.at(i, j);
  return {std::move(mg.a), {std::move(mg.b), std::move(db)}};
}

template <Real T>
FfnGrads<T> ffn_grad(const Tensor<T>& x, const LinearParams<T>& p1, const LinearParams<T>& p2,
                     const Tensor<T>& upstream) {
  check_ffn(x, p1, p2);
  const std::size_t b = x.dim(0), n = x.dim(1);
  if (upstream.shape() != Shape{b, n, p2.out_features()}) {
    throw ShapeError("ffn_grad: upstream " + shape_str(upstream.shape()) + " does not match output [" +
                     std::to_string(b) + "," + std::to_string(n) + "," +
                     std::to_string(p2.out_features()) + "]");
  }
  const Tensor<T> x2 = x.reshaped({b * n, x.dim(2)});
  const Tensor<T> pre = linear_uncounted(x2, p1);
  Tensor<T> act = pre;
  for (auto& v : act.data()) v = gelu(v);

  LinearGrads<T> g2 = linear_grad(act, p2, upstream.reshaped({b * n, p2.out_features()}));
  Tensor<T> dpre = std::move(g2.input);
  for (std::size_t i = 0; i < dpre.numel(); ++i) dpre[i] *= gelu_derivative(pre[i]);
  LinearGrads<T> g1 = linear_grad(x2, p1, dpre);
  return {std::move(g1.input).reshaped(x.shape()), std::move(g1.params), std::move(g2.params)};
}

#define FRAMESCOPE_INSTANTIATE(T)                                                                  \
  template struct LinearParams<T>;                                                                 \
  template struct ConvParams<T>;                                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> transpose(const Tensor<T>&);                                                  \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                               \
  template void softmax_inplace(std::span<T>);                                                     \
  template T gelu(T);                                                                              \
  template T gelu_derivative(T);                                                                   \
  template Tensor<T> linear(const Tensor<T>&, const LinearParams<T>&);                             \
  template Tensor<T> ffn_forward(const Tensor<T>&, const LinearParams<T>&, const LinearParams<T>&); \
  template Tensor<T> adaptive_avg_pool2d(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> pool_grad(const Shape&, const Tensor<T>&);                                    \
  template Tensor<T> depthwise_conv3x3(const Tensor<T>&, const ConvParams<T>&);                    \
  template ConvGrads<T> conv_grad(const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&);       \
  template MatmulGrads<T> matmul_grad(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template LinearGrads<T> linear_grad(const Tensor<T>&, const LinearParams<T>&, const Tensor<T>&); \
  template FfnGrads<T> ffn_grad(const Tensor<T>&, const LinearParams<T>&, const LinearParams<T>&,  \
                                const Tensor<T>&);

FRAMESCOPE_INSTANTIATE(float)
FRAMESCOPE_INSTANTIATE(double)

#undef FRAMESCOPE_INSTANTIATE

}  // namespace framescope
