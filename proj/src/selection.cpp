#include "framescope/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include "framescope/numerics.hpp"
#include "framescope/parallel.hpp"

namespace framescope {

namespace {

struct TokenLayout {
  std::size_t frames;
  std::size_t tokens_per_frame;
  std::size_t depth;
  std::size_t tokens() const { return frames * tokens_per_frame; }
};

template <Real T>
TokenLayout layout_of(const Tensor<T>& f) {
  if (f.rank() == 4) return {f.dim(0), f.dim(1) * f.dim(2), f.dim(3)};
  if (f.rank() == 2) return {1, f.dim(0), f.dim(1)};
  throw ShapeError("scoring: features must be T x H x W x D or S x D, got " + shape_str(f.shape()));
}

std::size_t resolve_cap(std::size_t cap) { return cap == 0 ? dense_attention_cap_bytes() : cap; }

FrameScore reduce_to_frames(const std::vector<double>& received, const TokenLayout& lay) {
  FrameScore s;
  s.scores.assign(lay.frames, 0.0);
  for (std::size_t t = 0; t < lay.frames; ++t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < lay.tokens_per_frame; ++j) acc += received[t * lay.tokens_per_frame + j];
    s.scores[t] = acc;
  }
  return s;
}

}  // namespace

double FrameScore::total() const { return std::accumulate(scores.begin(), scores.end(), 0.0); }

std::size_t dense_attention_cap_bytes() {
  if (const char* env = std::getenv("FRAMESCOPE_MEM_CAP_MB")) {
    char* end = nullptr;
    const unsigned long long mb = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && mb > 0) return static_cast<std::size_t>(mb) << 20;
  }
  return kDefaultMemCapMb << 20;
}

std::vector<std::size_t> uniform_sample_indices(std::size_t total_frames, std::size_t frames) {
  if (total_frames == 0 || frames == 0) {
    throw ArgumentError("uniform_sample_indices: total_frames and frames must be positive");
  }
  std::vector<std::size_t> idx(frames);
  for (std::size_t i = 0; i < frames; ++i) idx[i] = (i * total_frames) / frames;
  return idx;
}

std::size_t default_keyframe_count(std::size_t frames) { return std::max<std::size_t>(1, frames / 2); }

template <Real T>
Tensor<T> spatial_attention(const Tensor<T>& features, std::size_t mem_cap_bytes) {
  const TokenLayout lay = layout_of(features);
  const std::size_t s = lay.tokens();
  const std::size_t cap = resolve_cap(mem_cap_bytes);
  if (s > cap / sizeof(T) / s) {
    throw CapacityError("spatial_attention: dense " + std::to_string(s) + "x" + std::to_string(s) +
                        " attention needs " + std::to_string(s * s * sizeof(T) >> 20) +
                        " MiB, above the cap of " + std::to_string(cap >> 20) +
                        " MiB; use the streaming scorer or raise FRAMESCOPE_MEM_CAP_MB");
  }
  const Tensor<T> flat = features.reshaped({s, lay.depth});
  Tensor<T> logits = matmul(flat, transpose(flat));
  const T scale = std::sqrt(static_cast<T>(lay.depth));
  for (T& v : logits.data()) v /= scale;
  return softmax_rows(logits);
}

template Tensor32 spatial_attention(const Tensor32&, std::size_t);
template Tensor64 spatial_attention(const Tensor64&, std::size_t);

FrameScore frame_scores_dense(const Tensor32& features, std::size_t mem_cap_bytes) {
  const TokenLayout lay = layout_of(features);
  const Tensor64 sa = spatial_attention(features.cast<double>(), mem_cap_bytes);
  const std::size_t s = lay.tokens();
  std::vector<double> received(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    const double* row = sa.data().data() + i * s;
    for (std::size_t j = 0; j < s; ++j) received[j] += row[j];
  }
  return reduce_to_frames(received, lay);
}

FrameScore frame_scores_streaming(const Tensor32& features, std::size_t threads) {
  const TokenLayout lay = layout_of(features);
  const std::size_t s = lay.tokens();
  const Tensor64 flat = features.cast<double>().reshaped({s, lay.depth});
  const Tensor64 flat_t = transpose(flat);
  const double scale = std::sqrt(static_cast<double>(lay.depth));

  const std::size_t blocks = (s + kStreamingBlockRows - 1) / kStreamingBlockRows;
  std::vector<std::vector<double>> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t r0 = b * kStreamingBlockRows;
    const std::size_t rows = std::min(kStreamingBlockRows, s - r0);
    Tensor64 block({rows, lay.depth},
                   std::vector<double>(flat.data().begin() + r0 * lay.depth,
                                       flat.data().begin() + (r0 + rows) * lay.depth));
    Tensor64 logits = matmul(block, flat_t);
    std::vector<double> sums(s, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      auto row = logits.data().subspan(i * s, s);
      for (double& v : row) v /= scale;
      softmax_inplace(row);
      for (std::size_t j = 0; j < s; ++j) sums[j] += row[j];
    }
    partial[b] = std::move(sums);
  });

  std::vector<double> received(s, 0.0);
  for (const auto& p : partial)
    for (std::size_t j = 0; j < s; ++j) received[j] += p[j];
  return reduce_to_frames(received, lay);
}

FrameScore frame_scores(const FrameFeatures& f, const ScoringOptions& opts) {
  return opts.mode == ScoringMode::dense ? frame_scores_dense(f.tensor, opts.mem_cap_bytes)
                                         : frame_scores_streaming(f.tensor, opts.threads);
}

KeyFrameSet top_k_frames(const FrameScore& score, std::size_t k) {
  const std::size_t t = score.frames();
  if (k < 1 || k > t) {
    throw ArgumentError("top_k_frames: K=" + std::to_string(k) + " outside [1, " + std::to_string(t) + "]");
  }
  for (double v : score.scores) {
    if (!std::isfinite(v)) throw ArgumentError("top_k_frames: non-finite score");
  }
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (score.scores[a] != score.scores[b]) return score.scores[a] > score.scores[b];
                      return a < b;
                    });
  KeyFrameSet out{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)}};
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace framescope
