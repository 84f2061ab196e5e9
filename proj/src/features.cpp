#include "framescope/features.hpp"

#include <algorithm>
#include <cstring>

#include "framescope/splitmix.hpp"

namespace framescope {

namespace {

void require_rank4(const Tensor32& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be frames x H x W x D, got " + shape_str(t.shape()));
  }
}

}  // namespace

void EncoderSpec::validate() const {
  if (grid_h == 0 || grid_w == 0 || depth == 0) {
    throw ArgumentError("encoder '" + name + "': grid and depth must be positive");
  }
}

EncoderSpec default_image_encoder() { return {"clip-b16", 14, 14, 768, 224}; }
EncoderSpec default_video_encoder() { return {"videomamba-m", 14, 14, 576, 224}; }

FrameFeatures::FrameFeatures(Tensor32 t) : tensor(std::move(t)) { require_rank4(tensor, "frame features"); }
VideoFeatures::VideoFeatures(Tensor32 t) : tensor(std::move(t)) { require_rank4(tensor, "video features"); }

std::uint64_t frame_hash(std::size_t frame_index) {
  return splitmix64(static_cast<std::uint64_t>(frame_index) ^ 0x6B65796672616D65ULL);
}

FrameFeatures synth_image_features(std::uint64_t seed, std::size_t frames, const EncoderSpec& spec) {
  if (frames == 0) throw ArgumentError("synth_image_features: frame count must be at least 1");
  spec.validate();
  Tensor32 t({frames, spec.grid_h, spec.grid_w, spec.depth});
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<float>(unit_symmetric(splitmix64(seed ^ static_cast<std::uint64_t>(i))));
  }
  return FrameFeatures(std::move(t));
}

VideoFeatures synth_video_features(std::uint64_t seed, const std::vector<std::size_t>& keyframe_indices,
                                   const EncoderSpec& spec) {
  if (keyframe_indices.empty()) throw ArgumentError("synth_video_features: keyframe list is empty");
  for (std::size_t j = 1; j < keyframe_indices.size(); ++j) {
    if (keyframe_indices[j] <= keyframe_indices[j - 1]) {
      throw ArgumentError("synth_video_features: keyframe indices must be strictly increasing");
    }
  }
  spec.validate();
  const std::size_t per_frame = spec.grid_h * spec.grid_w * spec.depth;
  Tensor32 t({keyframe_indices.size(), spec.grid_h, spec.grid_w, spec.depth});
  float* out = t.data().data();
  for (std::size_t j = 0; j < keyframe_indices.size(); ++j) {
    const std::uint64_t base = seed ^ frame_hash(keyframe_indices[j]);
    for (std::size_t i = 0; i < per_frame; ++i) {
      *out++ = static_cast<float>(unit_symmetric(splitmix64(base ^ static_cast<std::uint64_t>(i))));
    }
  }
  return VideoFeatures(std::move(t));
}

template <Real T>
Tensor<T> synth_uniform(std::uint64_t seed, const Shape& shape, double scale) {
  Tensor<T> t(shape);
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<T>(scale * unit_symmetric(splitmix64(seed ^ static_cast<std::uint64_t>(i))));
  }
  return t;
}

template Tensor32 synth_uniform<float>(std::uint64_t, const Shape&, double);
template Tensor64 synth_uniform<double>(std::uint64_t, const Shape&, double);

Tensor32 gather_frames(const Tensor32& t, const std::vector<std::size_t>& frames) {
  if (frames.empty()) throw ArgumentError("gather_frames: no frames requested");
  const std::size_t per_frame = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = frames.size();
  Tensor32 out(shape);
  for (std::size_t j = 0; j < frames.size(); ++j) {
    if (frames[j] >= t.dim(0)) {
      throw ArgumentError("gather_frames: frame " + std::to_string(frames[j]) + " out of range for " +
                          std::to_string(t.dim(0)) + " frames");
    }
    std::memcpy(out.data().data() + j * per_frame, t.data().data() + frames[j] * per_frame,
                per_frame * sizeof(float));
  }
  return out;
}

}  // namespace framescope
