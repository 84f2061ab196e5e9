#include <cstring>

#include "doctest.h"
#include "framescope/json_io.hpp"
#include "framescope/pipeline.hpp"
#include "oracles.hpp"

using namespace framescope;

namespace {

// S = T * 16 <= 64 for T <= 4, so every stage runs in milliseconds.
PipelineConfig tiny(std::size_t frames = 4) {
  PipelineConfig cfg;
  cfg.frames = frames;
  cfg.image_encoder = {"tiny-img", 4, 4, 8, 64};
  cfg.video_encoder = {"tiny-vid", 4, 4, 6, 64};
  cfg.image_projector = {3, 3, std::nullopt};
  cfg.video_projector = {2, 2, 5};
  cfg.embed_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("token budget: reference configurations") {
  const PipelineConfig def;
  CHECK(token_budget(def) == TokenBudget{2304, 392, 2696});

  PipelineConfig no_fs;
  no_fs.frame_selection = FrameSelection::none;
  CHECK(token_budget(no_fs) == TokenBudget{2304, 784, 3088});

  PipelineConfig video_only;
  video_only.branch = BranchMode::video_only;
  CHECK(token_budget(video_only) == TokenBudget{0, 392, 392});

  PipelineConfig mlp;
  mlp.branch = BranchMode::image_only;
  mlp.projector = ProjectorKind::mlp_proj;
  mlp.frames = 32;
  CHECK(token_budget(mlp) == TokenBudget{6272, 0, 6272});

  PipelineConfig bad;
  bad.keyframes = 17;
  CHECK_THROWS_AS(token_budget(bad), ArgumentError);
  bad.keyframes = 0;
  CHECK_THROWS_AS(token_budget(bad), ArgumentError);
}

TEST_CASE("mac report: closed forms") {
  const PipelineConfig def;
  const auto m = mac_report(def);
  // 3136^2 * 768 logit multiplies.
  CHECK(m.scoring == 7'552'892'928ULL);
  CHECK(m.scoring == 3136ULL * 3136ULL * 768ULL);
  CHECK(m.image_projection == 16 * projector_macs_per_frame(def.image_projector_config()));
  CHECK(m.video_projection == 8 * projector_macs_per_frame(def.video_projector_config()));
  CHECK(m.total == m.scoring + m.image_projection + m.video_projection + m.fusion);

  // 196*768*896 + 196*896*896 + 896*144 + 896*(3*12-2)^2
  CHECK(projector_macs_per_frame(def.image_projector_config()) ==
        196ULL * 768 * 896 + 196ULL * 896 * 896 + 896ULL * 144 + 896ULL * 34 * 34);

  PipelineConfig half = def;
  half.keyframes = 4;
  CHECK(2 * mac_report(half).video_projection == m.video_projection);

  PipelineConfig img = def;
  img.branch = BranchMode::image_only;
  CHECK(mac_report(img).video_projection == 0);
  CHECK(mac_report(img).scoring == 0);

  PipelineConfig no_fs = def;
  no_fs.frame_selection = FrameSelection::none;
  CHECK(mac_report(no_fs).video_projection == 2 * m.video_projection);
  CHECK(mac_report(no_fs).scoring == 0);
}

TEST_CASE("run_pipeline: measured multiplies equal the analytic report") {
  for (auto branch : {BranchMode::dual, BranchMode::image_only, BranchMode::video_only}) {
    for (auto sel : {FrameSelection::attention_based, FrameSelection::none}) {
      for (auto kind : {ProjectorKind::et_proj, ProjectorKind::mlp_proj}) {
        for (auto mode : {ScoringMode::streaming, ScoringMode::dense}) {
          auto cfg = tiny();
          cfg.branch = branch;
          cfg.frame_selection = sel;
          cfg.projector = kind;
          cfg.scoring = mode;
          const auto r = run_pipeline(cfg);
          CHECK(r.measured_macs == r.macs);
          CHECK(r.budget == token_budget(cfg));
          CHECK(r.tokens.dim(1) == r.budget.total);
        }
      }
    }
  }
}

TEST_CASE("run_pipeline: selection halves the video branch") {
  auto on = tiny();
  auto off = tiny();
  off.frame_selection = FrameSelection::none;
  const auto a = run_pipeline(on);
  const auto b = run_pipeline(off);
  CHECK(2 * a.budget.video_tokens == b.budget.video_tokens);
  CHECK(2 * a.measured_macs.video_projection == b.measured_macs.video_projection);
  CHECK(a.keyframes.size() == 2);
  CHECK(b.keyframes.indices == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("run_pipeline: keyframes come from the scores and fusion order is image then video") {
  auto cfg = tiny();
  const auto r = run_pipeline(cfg);
  REQUIRE(r.scores.has_value());
  const auto feats = synth_image_features(image_feature_seed(cfg), cfg.frames, cfg.image_encoder);
  const auto ref = oracle::frame_scores(feats.tensor);
  for (std::size_t t = 0; t < cfg.frames; ++t) CHECK(std::abs(r.scores->scores[t] - ref[t]) < 1e-9);
  CHECK(r.keyframes.indices == oracle::top_k(ref, 2));

  auto img = cfg;
  img.branch = BranchMode::image_only;
  auto vid = cfg;
  vid.branch = BranchMode::video_only;
  const auto ri = run_pipeline(img);
  const auto rv = run_pipeline(vid);
  const std::size_t ni = ri.tokens.numel();
  REQUIRE(ni + rv.tokens.numel() == r.tokens.numel());
  CHECK(std::memcmp(r.tokens.data().data(), ri.tokens.data().data(), ni * sizeof(float)) == 0);
  CHECK(std::memcmp(r.tokens.data().data() + ni, rv.tokens.data().data(), rv.tokens.numel() * sizeof(float)) == 0);
}

TEST_CASE("run_pipeline: deterministic across runs and thread counts") {
  auto cfg = tiny();
  cfg.seed = 42;
  const auto a = run_pipeline(cfg, {}, {1});
  const auto b = run_pipeline(cfg, {}, {1});
  const auto c = run_pipeline(cfg, {}, {4});
  CHECK(a.tokens.identical(b.tokens));
  CHECK(a.tokens.identical(c.tokens));
  CHECK(a.digest == c.digest);
  CHECK(a.digest == tensor_digest(a.tokens));
  cfg.seed = 43;
  CHECK(run_pipeline(cfg).digest != a.digest);
}

TEST_CASE("run_pipeline: provided features") {
  auto cfg = tiny();
  FeatureSource src;
  src.image = synth_image_features(image_feature_seed(cfg), 4, cfg.image_encoder).tensor;
  CHECK(run_pipeline(cfg, src).digest == run_pipeline(cfg).digest);

  src.video = synth_uniform<float>(5, {4, 4, 4, 6});
  const auto r = run_pipeline(cfg, src);
  CHECK(r.budget == token_budget(cfg));

  src.image = synth_uniform<float>(1, {3, 4, 4, 8});
  CHECK_THROWS_AS(run_pipeline(cfg, src), ShapeError);
}

TEST_CASE("budget consistency over a randomized configuration sweep") {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    PipelineConfig cfg;
    cfg.frames = 1 + rng.below(4);
    cfg.keyframes = 1 + rng.below(cfg.frames);
    cfg.seed = rng.next();
    cfg.frame_selection = rng.below(2) ? FrameSelection::attention_based : FrameSelection::none;
    cfg.projector = rng.below(2) ? ProjectorKind::et_proj : ProjectorKind::mlp_proj;
    cfg.branch = static_cast<BranchMode>(rng.below(3));
    cfg.image_encoder = {"i", 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(6), 32};
    cfg.video_encoder = {"v", 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(6), 32};
    cfg.image_projector = {1 + rng.below(cfg.image_encoder.grid_h), 1 + rng.below(cfg.image_encoder.grid_w),
                           std::nullopt};
    cfg.video_projector = {1 + rng.below(cfg.video_encoder.grid_h), 1 + rng.below(cfg.video_encoder.grid_w),
                           1 + rng.below(5)};
    cfg.embed_dim = 1 + rng.below(6);
    const auto r = run_pipeline(cfg);
    CHECK(r.tokens.dim(1) == token_budget(cfg).total);
    CHECK(r.measured_macs == mac_report(cfg));
  }
}

TEST_CASE("stage plan") {
  const auto s1 = stage_plan(1);
  CHECK(s1.trainable == std::set<std::string>{"image_projector"});
  for (const char* m : {"image_encoder", "video_encoder", "slm"}) CHECK(s1.frozen.count(m) == 1);
  CHECK(stage_plan(2).trainable == std::set<std::string>{"video_projector"});
  const auto s3 = stage_plan(3);
  CHECK(s3.trainable.count("slm_adapter") == 1);
  CHECK(s3.adapter_note.find("r=64") != std::string::npos);
  CHECK(s3.adapter_note.find("lora_r=128") != std::string::npos);
  for (int s = 1; s <= 3; ++s) {
    const auto p = stage_plan(s);
    for (const auto& m : p.trainable) CHECK(p.frozen.count(m) == 0);
    const auto matrix = stage_matrix(p);
    CHECK(matrix.at("image_encoder") == "frozen");
    CHECK(matrix.at("video_encoder") == "frozen");
    CHECK(matrix.at("projection") == "trainable");
    CHECK(matrix.at("slm") == (s == 3 ? "trainable" : "frozen"));
  }
  CHECK_THROWS_AS(stage_plan(0), ArgumentError);
  CHECK_THROWS_AS(stage_plan(4), ArgumentError);
}

TEST_CASE("config JSON round trip and strict parsing") {
  auto cfg = tiny();
  cfg.keyframes = 3;
  cfg.seed = 0xFFFFFFFFFFFFFFFFULL;
  cfg.branch = BranchMode::video_only;
  cfg.scoring = ScoringMode::dense;
  const auto j = to_json(cfg);
  CHECK(j.at("schema") == "framescope.pipeline_config");
  CHECK(pipeline_config_from_json(j) == cfg);
  CHECK(pipeline_config_from_json(nlohmann::json::parse(j.dump())) == cfg);
  CHECK(pipeline_config_from_json(nlohmann::json::object()) == PipelineConfig{});

  CHECK_THROWS_AS(pipeline_config_from_json({{"frame", 16}}), ArgumentError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"frames", -1}}), ArgumentError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"frames", 2.5}}), ArgumentError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"branch", "both"}}), ArgumentError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"frames", 4}, {"keyframes", 5}}), ArgumentError);
}

TEST_CASE("run report carries the documented fields") {
  const auto cfg = tiny();
  const auto r = run_pipeline(cfg);
  const auto j = run_report(cfg, r);
  CHECK(j.at("schema") == "framescope.run_report");
  CHECK(j.at("budget").at("total") == r.budget.total);
  CHECK(j.at("keyframes").get<std::vector<std::size_t>>() == r.keyframes.indices);
  CHECK(j.at("digest") == digest_hex(r.digest));
  CHECK(j.at("macs").at("total") == r.macs.total);
  CHECK(j.contains("timings_ms"));
  CHECK(digest_hex(0xabc) == "0x0000000000000abc");
}
