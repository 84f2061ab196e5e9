#pragma once

// Vision-to-language projectors.
//
// et_proj (Efficient Token Projector), per frame of N = H*W tokens:
//   1. FFN: linear(C_in -> C_hidden) -> GELU -> linear(C_hidden -> C_out), per token
//   2. tokens N x C_out are laid out as a C_out x H x W map
//   3. adaptive average pooling to C_out x Hr x Wr
//   4. positional encoding: out = pooled + depthwise_conv3x3(pooled)
//   5. back to (Hr*Wr) x C_out tokens
//
// mlp_proj is steps 1 and 5 only, so the token count is unchanged.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "framescope/features.hpp"
#include "framescope/numerics.hpp"
#include "framescope/tensor.hpp"

namespace framescope {

enum class ProjectorKind { et_proj, mlp_proj };

std::string to_string(ProjectorKind kind);
ProjectorKind parse_projector_kind(const std::string& s);

struct ProjectorConfig {
  ProjectorKind kind = ProjectorKind::et_proj;
  std::size_t c_in = 768;
  std::size_t c_hidden = 896;
  std::size_t c_out = 896;
  std::size_t grid_in_h = 14;
  std::size_t grid_in_w = 14;
  std::size_t grid_out_h = 12;
  std::size_t grid_out_w = 12;

  std::size_t tokens_in() const { return grid_in_h * grid_in_w; }
  std::size_t tokens_out() const { return grid_out_h * grid_out_w; }
  // Throws ArgumentError on zero sizes, an upsampling grid, or an mlp_proj
  // whose output grid differs from its input grid.
  void validate() const;

  friend bool operator==(const ProjectorConfig&, const ProjectorConfig&) = default;
};

// For mlp_proj, ffn1/ffn2 are the two MLP layers and posenc is absent.
template <Real T>
struct ProjectorParams {
  LinearParams<T> ffn1;
  LinearParams<T> ffn2;
  std::optional<ConvParams<T>> posenc;

  void validate(const ProjectorConfig& cfg) const;
};

template <Real T>
struct ProjectorGrads {
  Tensor<T> input;
  ProjectorParams<T> params;
};

// FFN weights uniform in +-1/sqrt(fan_in) from the synthetic stream, zero
// biases, zero positional encoding.
template <Real T>
ProjectorParams<T> init_projector(const ProjectorConfig& cfg, std::uint64_t seed);

// x: B x N x C_in with N == grid_in_h * grid_in_w.
template <Real T>
Tensor<T> et_proj_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p);

template <Real T>
Tensor<T> mlp_proj_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p);

// Dispatches on cfg.kind.
template <Real T>
Tensor<T> projector_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p);

// Gradients of L w.r.t. input and every parameter, given dL/d(output).
template <Real T>
ProjectorGrads<T> projector_backward(const Tensor<T>& x, const ProjectorConfig& cfg,
                                     const ProjectorParams<T>& p, const Tensor<T>& upstream);

enum class Branch { image, video };

std::string to_string(Branch b);

struct TokenSequence {
  Tensor32 tokens;  // 1 x M x C_out
  Branch branch = Branch::image;

  std::size_t count() const { return tokens.dim(1); }
};

// Projects each frame of a frames x H x W x D tensor independently and
// concatenates the per-frame token blocks in frame order.
TokenSequence project_branch(const Tensor32& features, Branch branch, const ProjectorConfig& cfg,
                             const ProjectorParams<float>& p, std::size_t threads = 1);
TokenSequence project_branch(const FrameFeatures& f, const ProjectorConfig& cfg,
                             const ProjectorParams<float>& p, std::size_t threads = 1);
TokenSequence project_branch(const VideoFeatures& f, const ProjectorConfig& cfg,
                             const ProjectorParams<float>& p, std::size_t threads = 1);

// Multiplies for projecting one frame, matching the instrumented counter.
std::uint64_t projector_macs_per_frame(const ProjectorConfig& cfg);

// Directory layout: manifest.json plus one MVGF file per parameter tensor.
void save_projector(const std::filesystem::path& dir, const ProjectorConfig& cfg,
                    const ProjectorParams<float>& p);

struct LoadedProjector {
  ProjectorConfig config;
  ProjectorParams<float> params;
};
LoadedProjector load_projector(const std::filesystem::path& dir);

}  // namespace framescope
