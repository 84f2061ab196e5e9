#pragma once

// Frame sampling, attention-based frame scoring and top-K key-frame selection.
//
// Scoring flattens T x H x W x D features into S = T*H*W tokens, forms
// SA = softmax_rows(F F^T / sqrt(D)) and credits every token with the
// attention it receives (column sums of SA). A frame's score is the sum over
// its own tokens, so scores always add up to S.
//
// Two implementations:
//   dense      materializes SA (S*S values); refused above the memory cap
//   streaming  processes fixed 64-row blocks of SA and keeps one partial
//              column-sum vector per block; blocks are combined in block
//              order, so results do not depend on the thread count
// Both compute in double precision. Logits and softmax rows are bitwise
// identical between the two paths; only the column-sum grouping differs.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "framescope/features.hpp"
#include "framescope/tensor.hpp"

namespace framescope {

struct FrameScore {
  std::vector<double> scores;

  std::size_t frames() const { return scores.size(); }
  double total() const;
};

// Selected frame indices in ascending (temporal) order.
struct KeyFrameSet {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  friend bool operator==(const KeyFrameSet&, const KeyFrameSet&) = default;
};

enum class ScoringMode { dense, streaming };

struct ScoringOptions {
  ScoringMode mode = ScoringMode::streaming;
  std::size_t threads = 1;
  // Bytes allowed for the dense S x S matrix; 0 means dense_attention_cap_bytes().
  std::size_t mem_cap_bytes = 0;
};

inline constexpr std::size_t kStreamingBlockRows = 64;
inline constexpr std::size_t kDefaultMemCapMb = 512;

// FRAMESCOPE_MEM_CAP_MB if set to a positive integer, else kDefaultMemCapMb.
std::size_t dense_attention_cap_bytes();

// indices[i] = floor(i * total_frames / frames). Shorter videos repeat frames.
std::vector<std::size_t> uniform_sample_indices(std::size_t total_frames, std::size_t frames);

// K = T / 2, at least 1.
std::size_t default_keyframe_count(std::size_t frames);

// Features of rank 4 (T x H x W x D) or rank 2 (S x D). Throws CapacityError
// when S*S*sizeof(T) exceeds the cap.
template <Real T>
Tensor<T> spatial_attention(const Tensor<T>& features, std::size_t mem_cap_bytes = 0);

FrameScore frame_scores(const FrameFeatures& f, const ScoringOptions& opts = {});
FrameScore frame_scores_dense(const Tensor32& features, std::size_t mem_cap_bytes = 0);
FrameScore frame_scores_streaming(const Tensor32& features, std::size_t threads = 1);

// The K highest-scoring frames; ties go to the lower frame index.
KeyFrameSet top_k_frames(const FrameScore& score, std::size_t k);

}  // namespace framescope
