#pragma once

// Encoder stand-ins. Real CLIP / VideoMamba inference is out of scope; these
// generators produce reproducible features of the right geometry, and
// externally computed features can be loaded through the MVGF format.

#include <cstdint>
#include <string>
#include <vector>

#include "framescope/tensor.hpp"

namespace framescope {

struct EncoderSpec {
  std::string name;
  std::size_t grid_h = 14;
  std::size_t grid_w = 14;
  std::size_t depth = 768;
  std::size_t input_resolution = 224;

  std::size_t tokens_per_frame() const { return grid_h * grid_w; }
  void validate() const;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

// CLIP-B/16 at 224 px: a 14 x 14 patch grid of 768-wide embeddings.
EncoderSpec default_image_encoder();
// VideoMamba-M stand-in; depth 576 is a configurable default.
EncoderSpec default_video_encoder();

// T x Hs x Ws x Ds spatial features from the image encoder.
struct FrameFeatures {
  Tensor32 tensor;

  FrameFeatures() = default;
  explicit FrameFeatures(Tensor32 t);
  std::size_t frames() const { return tensor.dim(0); }
  std::size_t grid_h() const { return tensor.dim(1); }
  std::size_t grid_w() const { return tensor.dim(2); }
  std::size_t depth() const { return tensor.dim(3); }
};

// K x Ht x Wt x Dt temporal features from the video encoder.
struct VideoFeatures {
  Tensor32 tensor;

  VideoFeatures() = default;
  explicit VideoFeatures(Tensor32 t);
  std::size_t frames() const { return tensor.dim(0); }
  std::size_t grid_h() const { return tensor.dim(1); }
  std::size_t grid_w() const { return tensor.dim(2); }
  std::size_t depth() const { return tensor.dim(3); }
};

// Element i is unit_symmetric(splitmix64(seed ^ i)), i.e. uniform in [-1, 1).
FrameFeatures synth_image_features(std::uint64_t seed, std::size_t frames, const EncoderSpec& spec);

// Frame slot j, element i: unit_symmetric(splitmix64(seed ^ frame_hash(indices[j]) ^ i)).
// `keyframe_indices` must be non-empty and strictly increasing.
VideoFeatures synth_video_features(std::uint64_t seed, const std::vector<std::size_t>& keyframe_indices,
                                   const EncoderSpec& spec);

std::uint64_t frame_hash(std::size_t frame_index);

// Fill of an arbitrary shape from the same stream, scaled by `scale`.
template <Real T>
Tensor<T> synth_uniform(std::uint64_t seed, const Shape& shape, double scale = 1.0);

// Copies the listed frames (leading axis) out of a T x ... tensor.
Tensor32 gather_frames(const Tensor32& t, const std::vector<std::size_t>& frames);

}  // namespace framescope
