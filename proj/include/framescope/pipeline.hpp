#pragma once

// End-to-end token pipeline:
//   sample T frames -> image encoder stand-in -> frame scoring -> top-K
//   -> video encoder stand-in on the key frames -> project both branches
//   -> fuse (image tokens first, then video tokens)
// plus the closed-form token budget, the analytic MAC model and the staged
// training plan.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "framescope/features.hpp"
#include "framescope/projector.hpp"
#include "framescope/selection.hpp"

namespace framescope {

enum class FrameSelection { attention_based, none };
enum class BranchMode { dual, image_only, video_only };

std::string to_string(FrameSelection s);
std::string to_string(BranchMode m);
std::string to_string(ScoringMode m);
FrameSelection parse_frame_selection(const std::string& s);
BranchMode parse_branch_mode(const std::string& s);
ScoringMode parse_scoring_mode(const std::string& s);

// Per-branch projector settings; channel widths come from the encoder and
// the shared embedding width.
struct BranchProjectorSettings {
  std::size_t grid_out_h = 12;
  std::size_t grid_out_w = 12;
  std::optional<std::size_t> c_hidden;  // defaults to the embedding width

  friend bool operator==(const BranchProjectorSettings&, const BranchProjectorSettings&) = default;
};

struct PipelineConfig {
  std::size_t frames = 16;
  std::optional<std::size_t> keyframes;      // defaults to frames / 2
  std::optional<std::size_t> source_frames;  // video length at 1 FPS; defaults to frames
  std::uint64_t seed = 0;
  FrameSelection frame_selection = FrameSelection::attention_based;
  ProjectorKind projector = ProjectorKind::et_proj;
  BranchMode branch = BranchMode::dual;
  ScoringMode scoring = ScoringMode::streaming;
  EncoderSpec image_encoder = default_image_encoder();
  EncoderSpec video_encoder = default_video_encoder();
  BranchProjectorSettings image_projector{12, 12, std::nullopt};
  BranchProjectorSettings video_projector{7, 7, std::nullopt};
  std::size_t embed_dim = 896;  // SLM embedding width (Qwen2.5-0.5B)

  bool has_image_branch() const { return branch != BranchMode::video_only; }
  bool has_video_branch() const { return branch != BranchMode::image_only; }
  bool runs_scoring() const { return has_video_branch() && frame_selection == FrameSelection::attention_based; }
  // Frames fed to the video encoder: K with selection, all T without.
  std::size_t video_frames() const;
  std::size_t requested_keyframes() const;

  ProjectorConfig image_projector_config() const;
  ProjectorConfig video_projector_config() const;

  // Throws ArgumentError for K outside [1, T] and other invalid settings.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct TokenBudget {
  std::size_t image_tokens = 0;
  std::size_t video_tokens = 0;
  std::size_t total = 0;

  friend bool operator==(const TokenBudget&, const TokenBudget&) = default;
};

// Multiplies per stage (adds are free). See numerics.hpp for what counts.
struct MacReport {
  std::uint64_t scoring = 0;
  std::uint64_t image_projection = 0;
  std::uint64_t video_projection = 0;
  std::uint64_t fusion = 0;
  std::uint64_t total = 0;
  ScoringMode scoring_mode = ScoringMode::streaming;

  friend bool operator==(const MacReport&, const MacReport&) = default;
};

struct StageHyperparameters {
  int batch_size = 0;
  double learning_rate = 0.0;
  std::string schedule;
  double warmup_ratio = 0.0;
  std::string optimizer;
  int epochs = 0;
};

struct StagePlan {
  int stage = 0;
  std::string name;
  std::set<std::string> trainable;
  std::set<std::string> frozen;
  std::string adapter_note;
  StageHyperparameters hyperparameters;
};

// Image-side features are synthetic unless provided. Provided video features
// hold all T sampled frames; the key frames are gathered from them.
struct FeatureSource {
  std::optional<Tensor32> image;
  std::optional<Tensor32> video;
};

struct RunOptions {
  std::size_t threads = 1;
};

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct PipelineResult {
  Tensor32 tokens;  // 1 x (image + video tokens) x embed_dim
  std::vector<std::size_t> sampled_frames;
  std::optional<FrameScore> scores;
  KeyFrameSet keyframes;
  TokenBudget budget;
  MacReport macs;           // analytic
  MacReport measured_macs;  // instrumented counter deltas
  std::vector<StageTiming> timings;
  std::uint64_t digest = 0;
};

PipelineResult run_pipeline(const PipelineConfig& cfg, const FeatureSource& source = {},
                            const RunOptions& opts = {});

TokenBudget token_budget(const PipelineConfig& cfg);
MacReport mac_report(const PipelineConfig& cfg);
StagePlan stage_plan(int stage);

// Coarse frozen/trainable view per component row: image_encoder,
// video_encoder, slm (trainable when its adapter is) and projection
// (trainable when any projector is).
std::map<std::string, std::string> stage_matrix(const StagePlan& plan);

// Seeds derived from cfg.seed for each generated component.
std::uint64_t image_feature_seed(const PipelineConfig& cfg);
std::uint64_t video_feature_seed(const PipelineConfig& cfg);
std::uint64_t image_projector_seed(const PipelineConfig& cfg);
std::uint64_t video_projector_seed(const PipelineConfig& cfg);

// FNV-1a 64 over the little-endian bytes of the tensor payload.
std::uint64_t tensor_digest(const Tensor32& t);
std::string digest_hex(std::uint64_t digest);

}  // namespace framescope
