#pragma once

// JSON documents for configs and reports. Every top-level document carries
// "schema" and "schema_version" fields; field names are stable.
//
// Pipeline config (all fields optional on input; unknown fields rejected):
//   frames            int >= 1                       (16)
//   keyframes         int in [1, frames] or null     (frames / 2)
//   source_frames     int >= 1 or null               (frames)
//   seed              uint64                         (0)
//   frame_selection   "attention_based" | "none"
//   projector         "et_proj" | "mlp_proj"
//   branch            "dual" | "image_only" | "video_only"
//   scoring           "streaming" | "dense"
//   embed_dim         int                            (896)
//   image_encoder / video_encoder
//                     {name, grid: [h, w], depth, input_resolution}
//   image_projector / video_projector
//                     {grid_out: [h, w], c_hidden: int or null}

#include <string>

#include "framescope/pipeline.hpp"
#include "json.hpp"

namespace framescope {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::string& path);

nlohmann::json to_json(const TokenBudget& b);
nlohmann::json to_json(const MacReport& m);
nlohmann::json to_json(const StagePlan& p);
nlohmann::json to_json(const EncoderSpec& e);

// Run report: config echo, sampled frames, scores, key frames, budget,
// analytic and measured MACs, per-stage wall-clock (ms) and the token digest.
// Only "timings_ms" varies between identical runs.
nlohmann::json run_report(const PipelineConfig& cfg, const PipelineResult& r);

}  // namespace framescope
