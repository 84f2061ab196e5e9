#include "framescope/json_io.hpp"

#include <fstream>
#include <set>

namespace framescope {

using nlohmann::json;

namespace {

std::uint64_t as_uint(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) {
    throw ArgumentError("config: field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ArgumentError("config: field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::pair<std::size_t, std::size_t> as_pair(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2) throw ArgumentError("config: field '" + key + "' must be [h, w]");
  return {as_uint(v[0], key), as_uint(v[1], key)};
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ArgumentError("config: unknown field '" + key + "' in " + where);
  }
}

EncoderSpec encoder_from_json(const json& j, EncoderSpec e, const std::string& where) {
  reject_unknown(j, {"name", "grid", "depth", "input_resolution"}, where);
  if (j.contains("name")) e.name = as_string(j["name"], where + ".name");
  if (j.contains("grid")) std::tie(e.grid_h, e.grid_w) = as_pair(j["grid"], where + ".grid");
  if (j.contains("depth")) e.depth = as_uint(j["depth"], where + ".depth");
  if (j.contains("input_resolution")) e.input_resolution = as_uint(j["input_resolution"], where + ".input_resolution");
  return e;
}

BranchProjectorSettings projector_from_json(const json& j, BranchProjectorSettings s, const std::string& where) {
  reject_unknown(j, {"grid_out", "c_hidden"}, where);
  if (j.contains("grid_out")) std::tie(s.grid_out_h, s.grid_out_w) = as_pair(j["grid_out"], where + ".grid_out");
  if (j.contains("c_hidden")) {
    s.c_hidden = j["c_hidden"].is_null() ? std::nullopt
                                         : std::optional<std::size_t>(as_uint(j["c_hidden"], where + ".c_hidden"));
  }
  return s;
}

json optional_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

json projector_settings_json(const BranchProjectorSettings& s) {
  return {{"grid_out", {s.grid_out_h, s.grid_out_w}}, {"c_hidden", optional_json(s.c_hidden)}};
}

json projector_config_json(const ProjectorConfig& c) {
  return {{"kind", to_string(c.kind)},        {"c_in", c.c_in},
          {"c_hidden", c.c_hidden},           {"c_out", c.c_out},
          {"grid_in", {c.grid_in_h, c.grid_in_w}}, {"grid_out", {c.grid_out_h, c.grid_out_w}}};
}

}  // namespace

json to_json(const EncoderSpec& e) {
  return {{"name", e.name}, {"grid", {e.grid_h, e.grid_w}}, {"depth", e.depth}, {"input_resolution", e.input_resolution}};
}

json to_json(const PipelineConfig& c) {
  return {{"schema", "framescope.pipeline_config"},
          {"schema_version", kSchemaVersion},
          {"frames", c.frames},
          {"keyframes", optional_json(c.keyframes)},
          {"source_frames", optional_json(c.source_frames)},
          {"seed", c.seed},
          {"frame_selection", to_string(c.frame_selection)},
          {"projector", to_string(c.projector)},
          {"branch", to_string(c.branch)},
          {"scoring", to_string(c.scoring)},
          {"embed_dim", c.embed_dim},
          {"image_encoder", to_json(c.image_encoder)},
          {"video_encoder", to_json(c.video_encoder)},
          {"image_projector", projector_settings_json(c.image_projector)},
          {"video_projector", projector_settings_json(c.video_projector)}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  reject_unknown(j,
                 {"schema", "schema_version", "frames", "keyframes", "source_frames", "seed", "frame_selection",
                  "projector", "branch", "scoring", "embed_dim", "image_encoder", "video_encoder",
                  "image_projector", "video_projector"},
                 "pipeline config");
  if (j.contains("schema") && j["schema"] != "framescope.pipeline_config") {
    throw ArgumentError("config: schema must be 'framescope.pipeline_config'");
  }
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion) {
    throw ArgumentError("config: unsupported schema_version");
  }
  PipelineConfig c;
  if (j.contains("frames")) c.frames = as_uint(j["frames"], "frames");
  if (j.contains("keyframes") && !j["keyframes"].is_null()) c.keyframes = as_uint(j["keyframes"], "keyframes");
  if (j.contains("source_frames") && !j["source_frames"].is_null()) {
    c.source_frames = as_uint(j["source_frames"], "source_frames");
  }
  if (j.contains("seed")) c.seed = as_uint(j["seed"], "seed");
  if (j.contains("frame_selection")) c.frame_selection = parse_frame_selection(as_string(j["frame_selection"], "frame_selection"));
  if (j.contains("projector")) c.projector = parse_projector_kind(as_string(j["projector"], "projector"));
  if (j.contains("branch")) c.branch = parse_branch_mode(as_string(j["branch"], "branch"));
  if (j.contains("scoring")) c.scoring = parse_scoring_mode(as_string(j["scoring"], "scoring"));
  if (j.contains("embed_dim")) c.embed_dim = as_uint(j["embed_dim"], "embed_dim");
  if (j.contains("image_encoder")) c.image_encoder = encoder_from_json(j["image_encoder"], c.image_encoder, "image_encoder");
  if (j.contains("video_encoder")) c.video_encoder = encoder_from_json(j["video_encoder"], c.video_encoder, "video_encoder");
  if (j.contains("image_projector")) {
    c.image_projector = projector_from_json(j["image_projector"], c.image_projector, "image_projector");
  }
  if (j.contains("video_projector")) {
    c.video_projector = projector_from_json(j["video_projector"], c.video_projector, "video_projector");
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ArgumentError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return pipeline_config_from_json(j);
}

json to_json(const TokenBudget& b) {
  return {{"image_tokens", b.image_tokens}, {"video_tokens", b.video_tokens}, {"total", b.total}};
}

json to_json(const MacReport& m) {
  return {{"scoring", m.scoring},
          {"scoring_mode", to_string(m.scoring_mode)},
          {"image_projection", m.image_projection},
          {"video_projection", m.video_projection},
          {"fusion", m.fusion},
          {"total", m.total}};
}

json to_json(const StagePlan& p) {
  const auto& h = p.hyperparameters;
  return {{"stage", p.stage},
          {"name", p.name},
          {"trainable", p.trainable},
          {"frozen", p.frozen},
          {"matrix", stage_matrix(p)},
          {"adapter_note", p.adapter_note},
          {"hyperparameters",
           {{"batch_size", h.batch_size},
            {"learning_rate", h.learning_rate},
            {"schedule", h.schedule},
            {"warmup_ratio", h.warmup_ratio},
            {"optimizer", h.optimizer},
            {"epochs", h.epochs}}}};
}

json run_report(const PipelineConfig& cfg, const PipelineResult& r) {
  json timings = json::object();
  for (const auto& t : r.timings) timings[t.stage] = t.ms;
  json projectors = json::object();
  if (cfg.has_image_branch()) projectors["image"] = projector_config_json(cfg.image_projector_config());
  if (cfg.has_video_branch()) projectors["video"] = projector_config_json(cfg.video_projector_config());
  return {{"schema", "framescope.run_report"},
          {"schema_version", kSchemaVersion},
          {"config", to_json(cfg)},
          {"projectors", projectors},
          {"sampled_frames", r.sampled_frames},
          {"frame_scores", r.scores ? json(r.scores->scores) : json(nullptr)},
          {"keyframes", r.keyframes.indices},
          {"budget", to_json(r.budget)},
          {"macs", to_json(r.macs)},
          {"measured_macs", to_json(r.measured_macs)},
          {"tokens_shape", r.tokens.shape()},
          {"digest", digest_hex(r.digest)},
          {"timings_ms", timings}};
}

}  // namespace framescope
