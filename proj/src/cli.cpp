#include "framescope/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "framescope/gradcheck.hpp"
#include "framescope/json_io.hpp"
#include "framescope/mvgf.hpp"
#include "framescope/numerics.hpp"
#include "framescope/pipeline.hpp"

namespace framescope::cli {

namespace {

using nlohmann::json;

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

json with_schema(const std::string& schema, json body) {
  json out = {{"schema", schema}, {"schema_version", kSchemaVersion}};
  out.update(body);
  return out;
}

// Flags shared by every command that builds a PipelineConfig.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::optional<std::size_t> keyframes;
  std::optional<std::size_t> grid;
  std::optional<std::size_t> depth;
  std::optional<std::size_t> source_frames;
  bool no_frame_selection = false;
  std::string projector;
  std::string branch;
  std::string scoring;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Seed for synthetic features and projector weights");
    app->add_option("--frames", frames, "Sampled frames T");
    app->add_option("--keyframes", keyframes, "Key frames K (default T/2)");
    app->add_option("--grid", grid, "Image-encoder patch grid (square)");
    app->add_option("--depth", depth, "Image-encoder feature depth");
    app->add_option("--source-frames", source_frames, "Video length in frames at 1 FPS");
    app->add_flag("--no-frame-selection", no_frame_selection, "Feed all T frames to the video branch");
    app->add_option("--projector", projector, "Projector kind")->check(CLI::IsMember({"et", "mlp", "et_proj", "mlp_proj"}));
    app->add_option("--branch", branch, "Encoder wiring")
        ->check(CLI::IsMember({"dual", "image", "video", "image_only", "video_only"}));
    app->add_option("--scoring", scoring, "Frame-scoring implementation")->check(CLI::IsMember({"dense", "streaming"}));
  }

  PipelineConfig build() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
    if (seed) cfg.seed = *seed;
    if (frames) cfg.frames = *frames;
    if (keyframes) cfg.keyframes = *keyframes;
    if (grid) cfg.image_encoder.grid_h = cfg.image_encoder.grid_w = *grid;
    if (depth) cfg.image_encoder.depth = *depth;
    if (source_frames) cfg.source_frames = *source_frames;
    if (no_frame_selection) cfg.frame_selection = FrameSelection::none;
    if (!projector.empty()) cfg.projector = parse_projector_kind(projector);
    if (!branch.empty()) cfg.branch = parse_branch_mode(branch);
    if (!scoring.empty()) cfg.scoring = parse_scoring_mode(scoring);
    cfg.validate();
    return cfg;
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json pipeline_run_json(const PipelineConfig& cfg, const std::string& features, const std::string& video_features,
                       std::size_t threads, const std::string& out_path) {
  FeatureSource src;
  if (!features.empty()) src.image = read_features_as<float>(features);
  if (!video_features.empty()) src.video = read_features_as<float>(video_features);
  const PipelineResult r = run_pipeline(cfg, src, {threads});
  if (!out_path.empty()) write_features(out_path, r.tokens);
  return run_report(cfg, r);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"framescope: key-frame selection, token projection and token budgeting", "framescope"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads for scoring and projection")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic encoder features to an MVGF file");
  std::uint64_t synth_seed = 0;
  std::size_t synth_frames = 16, synth_grid = 14, synth_depth = 768;
  std::string synth_kind = "image", synth_out;
  std::vector<std::size_t> synth_indices;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--frames", synth_frames, "Frame count T");
  synth->add_option("--grid", synth_grid, "Patch grid (square)");
  synth->add_option("--depth", synth_depth, "Feature depth");
  synth->add_option("--kind", synth_kind, "image or video encoder stand-in")->check(CLI::IsMember({"image", "video"}));
  synth->add_option("--indices", synth_indices, "Key-frame indices for --kind video (default 0..T-1)")->delimiter(',');
  synth->add_option("-o,--output", synth_out, "Output path")->required();

  // select
  auto* select = app.add_subcommand("select", "Score frames and pick the top-K key frames");
  std::string select_in, select_scoring = "streaming";
  std::optional<std::size_t> select_k;
  select->add_option("features", select_in, "MVGF feature file (T x H x W x D)")->required()->check(CLI::ExistingFile);
  select->add_option("--keyframes", select_k, "K (default T/2)");
  select->add_option("--scoring", select_scoring, "dense or streaming")->check(CLI::IsMember({"dense", "streaming"}));

  // project
  auto* project = app.add_subcommand("project", "Project per-frame features to tokens");
  std::string project_in, project_kind = "et", project_params, project_save, project_out, project_branch_name = "image";
  std::uint64_t project_seed = 0;
  std::optional<std::size_t> project_grid_out, project_hidden;
  std::size_t project_embed = 896;
  project->add_option("features", project_in, "MVGF feature file (frames x H x W x D)")->required()->check(CLI::ExistingFile);
  project->add_option("--projector", project_kind, "et or mlp")->check(CLI::IsMember({"et", "mlp", "et_proj", "mlp_proj"}));
  project->add_option("--grid-out", project_grid_out, "Pooled grid (square) for et; default 12");
  project->add_option("--embed-dim", project_embed, "Output embedding width");
  project->add_option("--hidden", project_hidden, "FFN hidden width (default embed-dim)");
  project->add_option("--seed", project_seed, "Seed for freshly initialised weights");
  project->add_option("--params", project_params, "Load projector from a saved directory")->check(CLI::ExistingDirectory);
  project->add_option("--save-params", project_save, "Save the projector used to a directory");
  project->add_option("--branch", project_branch_name, "Label of the branch")->check(CLI::IsMember({"image", "video"}));
  project->add_option("-o,--output", project_out, "Write tokens (1 x M x C) to an MVGF file");

  // run / budget / flops / bench share the config flags
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline and print a run report");
  ConfigFlags run_flags;
  run_flags.attach(run_cmd);
  std::string run_features, run_video_features, run_out;
  run_cmd->add_option("--features", run_features, "Image features MVGF file instead of synthetic")->check(CLI::ExistingFile);
  run_cmd->add_option("--video-features", run_video_features, "Video features for all T frames")->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", run_out, "Write fused tokens to an MVGF file");

  auto* budget = app.add_subcommand("budget", "Closed-form token budget");
  ConfigFlags budget_flags;
  budget_flags.attach(budget);

  auto* flops = app.add_subcommand("flops", "Analytic multiply counts per stage");
  ConfigFlags flops_flags;
  flops_flags.attach(flops);

  auto* bench = app.add_subcommand("bench", "Wall-clock per stage over repeated runs");
  ConfigFlags bench_flags;
  bench_flags.attach(bench);
  std::size_t bench_repeat = 3;
  bench->add_option("--repeat", bench_repeat, "Timed repetitions")->check(CLI::Range(std::size_t{1}, std::size_t{10000}));

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  GradcheckOptions gc_opts;
  std::string gc_fault;
  gradcheck->add_option("--seeds", gc_opts.seeds, "Trials per op")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  gradcheck->add_option("--inject-fault", gc_fault, "Corrupt one op's analytic gradient (negative control)");

  auto* plan = app.add_subcommand("plan", "Frozen/trainable modules of a training stage");
  int plan_stage = 1;
  plan->add_option("--stage", plan_stage, "Stage 1, 2 or 3")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage_error", e.what());
    return 2;
  }

  try {
    json report;
    int status = 0;
    if (*synth) {
      const EncoderSpec spec{synth_kind == "image" ? "clip-b16" : "videomamba-m", synth_grid, synth_grid, synth_depth, 224};
      Tensor32 t;
      if (synth_kind == "image") {
        t = synth_image_features(synth_seed, synth_frames, spec).tensor;
      } else {
        std::vector<std::size_t> idx = synth_indices;
        if (idx.empty()) {
          if (synth_frames == 0) throw ArgumentError("synth: frame count must be at least 1");
          for (std::size_t i = 0; i < synth_frames; ++i) idx.push_back(i);
        }
        t = synth_video_features(synth_seed, idx, spec).tensor;
      }
      write_features(synth_out, t);
      report = with_schema("framescope.synth_report", {{"path", synth_out},
                                                       {"kind", synth_kind},
                                                       {"seed", synth_seed},
                                                       {"dtype", "f32"},
                                                       {"shape", t.shape()},
                                                       {"digest", digest_hex(tensor_digest(t))}});
    } else if (*select) {
      const FrameFeatures f(read_features_as<float>(select_in));
      const std::size_t k = select_k.value_or(default_keyframe_count(f.frames()));
      const FrameScore s = frame_scores(f, {parse_scoring_mode(select_scoring), threads, 0});
      const KeyFrameSet kf = top_k_frames(s, k);
      report = with_schema("framescope.select_report", {{"features", select_in},
                                                        {"frames", f.frames()},
                                                        {"tokens", f.frames() * f.grid_h() * f.grid_w()},
                                                        {"k", k},
                                                        {"scoring", select_scoring},
                                                        {"scores", s.scores},
                                                        {"score_total", s.total()},
                                                        {"keyframes", kf.indices}});
    } else if (*project) {
      const Tensor32 feats = read_features_as<float>(project_in);
      if (feats.rank() != 4) throw ShapeError("project: features must be frames x H x W x D, got " + shape_str(feats.shape()));
      ProjectorConfig cfg;
      ProjectorParams<float> params;
      if (!project_params.empty()) {
        LoadedProjector lp = load_projector(project_params);
        cfg = lp.config;
        params = std::move(lp.params);
      } else {
        cfg.kind = parse_projector_kind(project_kind);
        cfg.c_in = feats.dim(3);
        cfg.c_out = project_embed;
        cfg.c_hidden = project_hidden.value_or(project_embed);
        cfg.grid_in_h = feats.dim(1);
        cfg.grid_in_w = feats.dim(2);
        const std::size_t g = cfg.kind == ProjectorKind::mlp_proj ? 0 : project_grid_out.value_or(12);
        cfg.grid_out_h = cfg.kind == ProjectorKind::mlp_proj ? cfg.grid_in_h : g;
        cfg.grid_out_w = cfg.kind == ProjectorKind::mlp_proj ? cfg.grid_in_w : g;
        cfg.validate();
        params = init_projector<float>(cfg, project_seed);
      }
      const Branch branch = project_branch_name == "video" ? Branch::video : Branch::image;
      const std::uint64_t before = mac_count();
      const TokenSequence seq = project_branch(feats, branch, cfg, params, threads);
      const std::uint64_t macs = mac_count() - before;
      if (!project_save.empty()) save_projector(project_save, cfg, params);
      if (!project_out.empty()) write_features(project_out, seq.tokens);
      report = with_schema("framescope.project_report",
                           {{"features", project_in},
                            {"branch", to_string(branch)},
                            {"projector", {{"kind", to_string(cfg.kind)},
                                           {"c_in", cfg.c_in},
                                           {"c_hidden", cfg.c_hidden},
                                           {"c_out", cfg.c_out},
                                           {"grid_in", {cfg.grid_in_h, cfg.grid_in_w}},
                                           {"grid_out", {cfg.grid_out_h, cfg.grid_out_w}}}},
                            {"frames", feats.dim(0)},
                            {"tokens_shape", seq.tokens.shape()},
                            {"macs", macs},
                            {"analytic_macs", feats.dim(0) * projector_macs_per_frame(cfg)},
                            {"digest", digest_hex(tensor_digest(seq.tokens))}});
    } else if (*run_cmd) {
      const PipelineConfig cfg = run_flags.build();
      report = pipeline_run_json(cfg, run_features, run_video_features, threads, run_out);
    } else if (*budget) {
      const PipelineConfig cfg = budget_flags.build();
      report = with_schema("framescope.token_budget", to_json(token_budget(cfg)));
      report["config"] = to_json(cfg);
    } else if (*flops) {
      const PipelineConfig cfg = flops_flags.build();
      report = with_schema("framescope.mac_report", to_json(mac_report(cfg)));
      report["config"] = to_json(cfg);
    } else if (*bench) {
      const PipelineConfig cfg = bench_flags.build();
      const MacReport macs = mac_report(cfg);
      const std::map<std::string, std::uint64_t> stage_macs = {{"scoring", macs.scoring},
                                                               {"image_projection", macs.image_projection},
                                                               {"video_projection", macs.video_projection},
                                                               {"fusion", macs.fusion}};
      std::vector<std::string> order;
      std::map<std::string, std::vector<double>> samples;
      std::vector<double> totals;
      std::uint64_t digest = 0;
      for (std::size_t i = 0; i < bench_repeat; ++i) {
        const PipelineResult r = run_pipeline(cfg, {}, {threads});
        double total = 0.0;
        for (const auto& t : r.timings) {
          if (!samples.count(t.stage)) order.push_back(t.stage);
          samples[t.stage].push_back(t.ms);
          total += t.ms;
        }
        totals.push_back(total);
        digest = r.digest;
      }
      json stages = json::object();
      auto stage_json = [](const std::vector<double>& v, std::uint64_t m) {
        const double med = median(v);
        return json{{"samples_ms", v},
                    {"median_ms", med},
                    {"min_ms", *std::min_element(v.begin(), v.end())},
                    {"macs", m},
                    {"macs_per_sec", med > 0.0 ? static_cast<double>(m) / (med / 1000.0) : 0.0}};
      };
      for (const auto& name : order) {
        const auto it = stage_macs.find(name);
        stages[name] = stage_json(samples[name], it == stage_macs.end() ? 0 : it->second);
      }
      stages["total"] = stage_json(totals, macs.total);
      report = with_schema("framescope.bench_report", {{"config", to_json(cfg)},
                                                       {"repeat", bench_repeat},
                                                       {"threads", threads},
                                                       {"budget", to_json(token_budget(cfg))},
                                                       {"macs", to_json(macs)},
                                                       {"stages", stages},
                                                       {"digest", digest_hex(digest)}});
    } else if (*gradcheck) {
      if (!gc_fault.empty()) gc_opts.inject_fault = gc_fault;
      const auto results = run_gradchecks(gc_opts);
      json ops = json::array();
      bool all = true;
      for (const auto& r : results) {
        all = all && r.passed;
        ops.push_back({{"op", r.op},
                       {"trials", r.trials.size()},
                       {"max_rel_error", r.max_rel_error},
                       {"status", r.passed ? "PASS" : "FAIL"}});
      }
      report = with_schema("framescope.gradcheck_report", {{"seeds", gc_opts.seeds},
                                                           {"step", gc_opts.step},
                                                           {"tolerance", gc_opts.tolerance},
                                                           {"ops", ops},
                                                           {"passed", all}});
      status = all ? 0 : 1;
    } else if (*plan) {
      report = with_schema("framescope.stage_plan", to_json(stage_plan(plan_stage)));
    }
    out << report.dump(2) << "\n";
    return status;
  } catch (const ArgumentError& e) {
    print_error(err, e.kind(), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal_error", e.what());
    return 1;
  }
}

}  // namespace framescope::cli
