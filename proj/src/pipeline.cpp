#include "framescope/pipeline.hpp"

#include <bit>
#include <cstdio>
#include <numeric>

#include "framescope/numerics.hpp"

namespace framescope {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Times one stage and attributes the counter delta to it.
class StageMeter {
 public:
  StageMeter(PipelineResult& r, std::string stage) : r_(r), stage_(std::move(stage)) {}
  std::uint64_t finish() {
    r_.timings.push_back({stage_, elapsed_ms(start_)});
    return mac_count() - macs_at_start_;
  }

 private:
  PipelineResult& r_;
  std::string stage_;
  Clock::time_point start_ = Clock::now();
  std::uint64_t macs_at_start_ = mac_count();
};

constexpr std::uint64_t kVideoFeatureSalt = 0x766964656F000001ULL;
constexpr std::uint64_t kImageProjectorSalt = 0x70726F6A00000001ULL;
constexpr std::uint64_t kVideoProjectorSalt = 0x70726F6A00000002ULL;

ProjectorConfig branch_config(ProjectorKind kind, const EncoderSpec& enc, const BranchProjectorSettings& s,
                              std::size_t embed_dim) {
  ProjectorConfig c;
  c.kind = kind;
  c.c_in = enc.depth;
  c.c_out = embed_dim;
  c.c_hidden = s.c_hidden.value_or(embed_dim);
  c.grid_in_h = enc.grid_h;
  c.grid_in_w = enc.grid_w;
  c.grid_out_h = kind == ProjectorKind::mlp_proj ? enc.grid_h : s.grid_out_h;
  c.grid_out_w = kind == ProjectorKind::mlp_proj ? enc.grid_w : s.grid_out_w;
  return c;
}

void check_provided(const Tensor32& t, std::size_t frames, const EncoderSpec& enc, const char* what) {
  if (t.shape() != Shape{frames, enc.grid_h, enc.grid_w, enc.depth}) {
    throw ShapeError(std::string(what) + " features " + shape_str(t.shape()) + " incompatible with config [" +
                     std::to_string(frames) + "," + std::to_string(enc.grid_h) + "," +
                     std::to_string(enc.grid_w) + "," + std::to_string(enc.depth) + "]");
  }
}

}  // namespace

std::string to_string(FrameSelection s) { return s == FrameSelection::attention_based ? "attention_based" : "none"; }

std::string to_string(BranchMode m) {
  switch (m) {
    case BranchMode::dual: return "dual";
    case BranchMode::image_only: return "image_only";
    case BranchMode::video_only: return "video_only";
  }
  return "dual";
}

std::string to_string(ScoringMode m) { return m == ScoringMode::dense ? "dense" : "streaming"; }

FrameSelection parse_frame_selection(const std::string& s) {
  if (s == "attention_based") return FrameSelection::attention_based;
  if (s == "none") return FrameSelection::none;
  throw ArgumentError("unknown frame_selection '" + s + "' (expected attention_based or none)");
}

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "dual") return BranchMode::dual;
  if (s == "image_only" || s == "image") return BranchMode::image_only;
  if (s == "video_only" || s == "video") return BranchMode::video_only;
  throw ArgumentError("unknown branch mode '" + s + "' (expected dual, image_only or video_only)");
}

ScoringMode parse_scoring_mode(const std::string& s) {
  if (s == "dense") return ScoringMode::dense;
  if (s == "streaming") return ScoringMode::streaming;
  throw ArgumentError("unknown scoring mode '" + s + "' (expected dense or streaming)");
}

std::size_t PipelineConfig::requested_keyframes() const {
  return keyframes.value_or(default_keyframe_count(frames));
}

std::size_t PipelineConfig::video_frames() const {
  return frame_selection == FrameSelection::none ? frames : requested_keyframes();
}

ProjectorConfig PipelineConfig::image_projector_config() const {
  return branch_config(projector, image_encoder, image_projector, embed_dim);
}

ProjectorConfig PipelineConfig::video_projector_config() const {
  return branch_config(projector, video_encoder, video_projector, embed_dim);
}

void PipelineConfig::validate() const {
  if (frames == 0) throw ArgumentError("config: frames must be at least 1");
  const std::size_t k = requested_keyframes();
  if (k < 1 || k > frames) {
    throw ArgumentError("config: keyframes K=" + std::to_string(k) + " outside [1, " + std::to_string(frames) + "]");
  }
  if (source_frames && *source_frames == 0) throw ArgumentError("config: source_frames must be at least 1");
  if (embed_dim == 0) throw ArgumentError("config: embed_dim must be positive");
  image_encoder.validate();
  video_encoder.validate();
  if (has_image_branch()) image_projector_config().validate();
  if (has_video_branch()) video_projector_config().validate();
}

TokenBudget token_budget(const PipelineConfig& cfg) {
  cfg.validate();
  TokenBudget b;
  if (cfg.has_image_branch()) b.image_tokens = cfg.frames * cfg.image_projector_config().tokens_out();
  if (cfg.has_video_branch()) b.video_tokens = cfg.video_frames() * cfg.video_projector_config().tokens_out();
  b.total = b.image_tokens + b.video_tokens;
  return b;
}

MacReport mac_report(const PipelineConfig& cfg) {
  cfg.validate();
  MacReport r;
  r.scoring_mode = cfg.scoring;
  if (cfg.runs_scoring()) {
    const std::uint64_t s = cfg.frames * cfg.image_encoder.tokens_per_frame();
    r.scoring = matmul_macs(s, cfg.image_encoder.depth, s);
  }
  if (cfg.has_image_branch()) r.image_projection = cfg.frames * projector_macs_per_frame(cfg.image_projector_config());
  if (cfg.has_video_branch()) {
    r.video_projection = cfg.video_frames() * projector_macs_per_frame(cfg.video_projector_config());
  }
  r.fusion = 0;
  r.total = r.scoring + r.image_projection + r.video_projection + r.fusion;
  return r;
}

std::uint64_t image_feature_seed(const PipelineConfig& cfg) { return cfg.seed; }
std::uint64_t video_feature_seed(const PipelineConfig& cfg) { return cfg.seed ^ kVideoFeatureSalt; }
std::uint64_t image_projector_seed(const PipelineConfig& cfg) { return cfg.seed ^ kImageProjectorSalt; }
std::uint64_t video_projector_seed(const PipelineConfig& cfg) { return cfg.seed ^ kVideoProjectorSalt; }

PipelineResult run_pipeline(const PipelineConfig& cfg, const FeatureSource& source, const RunOptions& opts) {
  cfg.validate();
  PipelineResult r;
  r.macs = mac_report(cfg);
  r.measured_macs.scoring_mode = cfg.scoring;
  const std::size_t t = cfg.frames;

  {
    StageMeter m(r, "sample");
    r.sampled_frames = uniform_sample_indices(cfg.source_frames.value_or(t), t);
    m.finish();
  }

  std::optional<FrameFeatures> image;
  if (cfg.has_image_branch() || cfg.runs_scoring()) {
    StageMeter m(r, "image_encode");
    if (source.image) {
      check_provided(*source.image, t, cfg.image_encoder, "image");
      image = FrameFeatures(*source.image);
    } else {
      image = synth_image_features(image_feature_seed(cfg), t, cfg.image_encoder);
    }
    m.finish();
  }

  if (cfg.runs_scoring()) {
    {
      StageMeter m(r, "scoring");
      r.scores = frame_scores(*image, {cfg.scoring, opts.threads, 0});
      r.measured_macs.scoring = m.finish();
    }
    StageMeter m(r, "selection");
    r.keyframes = top_k_frames(*r.scores, cfg.requested_keyframes());
    m.finish();
  } else if (cfg.has_video_branch()) {
    r.keyframes.indices.resize(t);
    std::iota(r.keyframes.indices.begin(), r.keyframes.indices.end(), std::size_t{0});
  }

  std::optional<VideoFeatures> video;
  if (cfg.has_video_branch()) {
    StageMeter m(r, "video_encode");
    if (source.video) {
      check_provided(*source.video, t, cfg.video_encoder, "video");
      video = VideoFeatures(gather_frames(*source.video, r.keyframes.indices));
    } else {
      video = synth_video_features(video_feature_seed(cfg), r.keyframes.indices, cfg.video_encoder);
    }
    m.finish();
  }

  std::optional<TokenSequence> image_tokens, video_tokens;
  if (cfg.has_image_branch()) {
    StageMeter m(r, "image_projection");
    const ProjectorConfig pc = cfg.image_projector_config();
    const auto params = init_projector<float>(pc, image_projector_seed(cfg));
    image_tokens = project_branch(*image, pc, params, opts.threads);
    r.measured_macs.image_projection = m.finish();
  }
  if (cfg.has_video_branch()) {
    StageMeter m(r, "video_projection");
    const ProjectorConfig pc = cfg.video_projector_config();
    const auto params = init_projector<float>(pc, video_projector_seed(cfg));
    video_tokens = project_branch(*video, pc, params, opts.threads);
    r.measured_macs.video_projection = m.finish();
  }

  {
    StageMeter m(r, "fusion");
    r.budget.image_tokens = image_tokens ? image_tokens->count() : 0;
    r.budget.video_tokens = video_tokens ? video_tokens->count() : 0;
    r.budget.total = r.budget.image_tokens + r.budget.video_tokens;
    const std::size_t c = cfg.embed_dim;
    std::vector<float> fused;
    fused.reserve(r.budget.total * c);
    for (const auto* seq : {image_tokens ? &*image_tokens : nullptr, video_tokens ? &*video_tokens : nullptr}) {
      if (seq) fused.insert(fused.end(), seq->tokens.data().begin(), seq->tokens.data().end());
    }
    r.tokens = Tensor32({1, r.budget.total, c}, std::move(fused));
    r.measured_macs.fusion = m.finish();
  }
  r.measured_macs.total = r.measured_macs.scoring + r.measured_macs.image_projection +
                          r.measured_macs.video_projection + r.measured_macs.fusion;
  r.digest = tensor_digest(r.tokens);
  return r;
}

StagePlan stage_plan(int stage) {
  StagePlan p;
  p.stage = stage;
  const StageHyperparameters warmup{128, 1e-3, "cosine_decay", 0.03, "AdamW", 2};
  switch (stage) {
    case 1:
      p.name = "image_projector_pretraining";
      p.trainable = {"image_projector"};
      p.frozen = {"image_encoder", "video_encoder", "slm", "video_projector"};
      p.adapter_note = "no adapter; the small language model is frozen";
      p.hyperparameters = warmup;
      break;
    case 2:
      p.name = "video_projector_pretraining";
      p.trainable = {"video_projector"};
      p.frozen = {"image_encoder", "video_encoder", "slm", "image_projector"};
      p.adapter_note = "no adapter; the small language model is frozen";
      p.hyperparameters = warmup;
      break;
    case 3:
      p.name = "instruction_tuning";
      p.trainable = {"image_projector", "video_projector", "slm_adapter"};
      p.frozen = {"image_encoder", "video_encoder"};
      p.adapter_note =
          "LoRA adapter on the small language model; the rank is reported twice with different values: "
          "r=64 (implementation details) and lora_r=128 with lora_alpha=256 (training details)";
      p.hyperparameters = {64, 2e-4, "cosine_decay", 0.03, "AdamW", 2};
      break;
    default:
      throw ArgumentError("stage_plan: stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
  return p;
}

std::map<std::string, std::string> stage_matrix(const StagePlan& plan) {
  auto state = [&](std::initializer_list<const char*> parts) {
    for (const char* part : parts) {
      if (plan.trainable.count(part)) return std::string("trainable");
    }
    return std::string("frozen");
  };
  return {{"image_encoder", state({"image_encoder"})},
          {"video_encoder", state({"video_encoder"})},
          {"slm", state({"slm", "slm_adapter"})},
          {"projection", state({"image_projector", "video_projector"})}};
}

std::uint64_t tensor_digest(const Tensor32& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float v : t.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace framescope
