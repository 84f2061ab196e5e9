#pragma once

// Deterministic dense kernels with analytic backward passes.
//
// All kernels are pure functions. Reductions run in a fixed left-to-right
// order in the tensor's own dtype, so outputs are bitwise reproducible.
//
// Multiply accounting: every forward contraction kernel adds the number of
// multiplications it performed to a process-wide counter (see mac_count()).
// What is counted:
//   matmul / linear      one per A[i][l]*B[l][j] product
//   adaptive pooling     one per output element (the 1/area scaling)
//   depthwise conv 3x3   one per in-bounds tap; zero-padding taps are skipped
// Elementwise activations, softmax and bias additions are not counted, nor are
// the contractions inside the *_grad kernels. Forward calls made while
// computing a gradient count like any other forward call.

#include <array>
#include <cstdint>
#include <utility>

#include "framescope/tensor.hpp"

namespace framescope {

// ---------------------------------------------------------------------------
// Multiply counter

std::uint64_t mac_count();
void reset_mac_counter();
void add_macs(std::uint64_t n);

// ---------------------------------------------------------------------------
// Parameter types

template <Real T>
struct LinearParams {
  Tensor<T> weight;  // C_in x C_out
  Tensor<T> bias;    // C_out

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void validate() const;
};

template <Real T>
struct ConvParams {
  Tensor<T> kernel;  // C x 3 x 3, one filter per channel
  Tensor<T> bias;    // C

  std::size_t channels() const { return kernel.dim(0); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Forward kernels

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <Real T>
Tensor<T> transpose(const Tensor<T>& m);

// Row-wise softmax with max subtraction.
template <Real T>
Tensor<T> softmax_rows(const Tensor<T>& m);

// In-place softmax of one row; softmax_rows applies exactly this per row.
template <Real T>
void softmax_inplace(std::span<T> row);

// GELU, tanh approximation:
//   gelu(x) = 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
template <Real T>
T gelu(T x);
template <Real T>
T gelu_derivative(T x);

// y = x W + b for x of shape N x C_in.
template <Real T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p);

// Per-token linear -> GELU -> linear on x of shape B x N x C_in.
template <Real T>
Tensor<T> ffn_forward(const Tensor<T>& x, const LinearParams<T>& p1, const LinearParams<T>& p2);

// Half-open index range [begin, end) of output cell `i` when pooling an axis of
// length `in` down to `out` cells: [floor(i*in/out), ceil((i+1)*in/out)).
std::pair<std::size_t, std::size_t> pool_region(std::size_t i, std::size_t in, std::size_t out);

// X: C x H x W -> C x Hr x Wr.
template <Real T>
Tensor<T> adaptive_avg_pool2d(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

// Per-channel 3x3 cross-correlation, zero padding 1, stride 1, plus bias.
template <Real T>
Tensor<T> depthwise_conv3x3(const Tensor<T>& x, const ConvParams<T>& p);

// ---------------------------------------------------------------------------
// Backward kernels. `upstream` is dL/d(output) of the matching forward call.

template <Real T>
struct MatmulGrads {
  Tensor<T> a;
  Tensor<T> b;
};

template <Real T>
struct LinearGrads {
  Tensor<T> input;
  LinearParams<T> params;
};

template <Real T>
struct FfnGrads {
  Tensor<T> input;
  LinearParams<T> p1;
  LinearParams<T> p2;
};

template <Real T>
struct ConvGrads {
  Tensor<T> input;
  ConvParams<T> params;
};

template <Real T>
MatmulGrads<T> matmul_grad(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& upstream);

template <Real T>
LinearGrads<T> linear_grad(const Tensor<T>& x, const LinearParams<T>& p, const Tensor<T>& upstream);

template <Real T>
FfnGrads<T> ffn_grad(const Tensor<T>& x, const LinearParams<T>& p1, const LinearParams<T>& p2,
                     const Tensor<T>& upstream);

// Pooling is linear in its input; only the input shape C x H x W is needed.
template <Real T>
Tensor<T> pool_grad(const Shape& input_shape, const Tensor<T>& upstream);

template <Real T>
ConvGrads<T> conv_grad(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& upstream);

// ---------------------------------------------------------------------------
// MAC formulas matching the instrumented counts above.

std::uint64_t matmul_macs(std::uint64_t m, std::uint64_t k, std::uint64_t n);
std::uint64_t pool_macs(std::uint64_t channels, std::uint64_t out_h, std::uint64_t out_w);
// In-bounds taps of a 3x3 padded convolution: C * (3H - 2) * (3W - 2).
std::uint64_t conv3x3_macs(std::uint64_t channels, std::uint64_t h, std::uint64_t w);

}  // namespace framescope
