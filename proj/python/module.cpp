#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "framescope/gradcheck.hpp"
#include "framescope/json_io.hpp"
#include "framescope/mvgf.hpp"
#include "framescope/numerics.hpp"
#include "framescope/pipeline.hpp"

namespace py = pybind11;
using namespace framescope;

namespace {

template <Real T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::memcpy(out.mutable_data(), t.data().data(), t.numel() * sizeof(T));
  return out;
}

template <Real T>
Tensor<T> from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(shape, std::vector<T>(a.data(), a.data() + a.size()));
}

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

PipelineConfig config_from(const py::object& o) {
  if (o.is_none()) return PipelineConfig{};
  return pipeline_config_from_json(from_py(o));
}

EncoderSpec spec_of(std::size_t grid, std::size_t depth) { return {"synthetic", grid, grid, depth, 224}; }

}  // namespace

PYBIND11_MODULE(_framescope, m) {
  m.doc() = "Attention-based key-frame selection, efficient token projection and token budgeting";

  static py::exception<Error> base(m, "FramescopeError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("synth_image_features",
        [](std::uint64_t seed, std::size_t frames, std::size_t grid, std::size_t depth) {
          return to_numpy(synth_image_features(seed, frames, spec_of(grid, depth)).tensor);
        },
        py::arg("seed"), py::arg("frames"), py::arg("grid") = 14, py::arg("depth") = 768,
        "Deterministic T x grid x grid x depth image-encoder stand-in features (float32).");

  m.def("synth_video_features",
        [](std::uint64_t seed, const std::vector<std::size_t>& indices, std::size_t grid, std::size_t depth) {
          return to_numpy(synth_video_features(seed, indices, spec_of(grid, depth)).tensor);
        },
        py::arg("seed"), py::arg("keyframe_indices"), py::arg("grid") = 14, py::arg("depth") = 576);

  m.def("uniform_sample_indices", &uniform_sample_indices, py::arg("total_frames"), py::arg("frames"));

  m.def("spatial_attention",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& f) {
          return to_numpy(spatial_attention(from_numpy<double>(f)));
        },
        py::arg("features"), "Dense S x S softmax attention over all tokens (float64).");

  m.def("frame_scores",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& f, const std::string& mode,
           std::size_t threads) {
          py::gil_scoped_release release;
          return frame_scores(FrameFeatures(from_numpy<float>(f)), {parse_scoring_mode(mode), threads, 0}).scores;
        },
        py::arg("features"), py::arg("mode") = "streaming", py::arg("threads") = 1);

  m.def("top_k_frames",
        [](const std::vector<double>& scores, std::size_t k) { return top_k_frames(FrameScore{scores}, k).indices; },
        py::arg("scores"), py::arg("k"));

  m.def("adaptive_avg_pool2d",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, std::size_t hr, std::size_t wr) {
          return to_numpy(adaptive_avg_pool2d(from_numpy<double>(x), hr, wr));
        },
        py::arg("x"), py::arg("out_h"), py::arg("out_w"));

  m.def("project",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& f, const std::string& kind,
           std::size_t grid_out, std::size_t embed_dim, std::optional<std::size_t> hidden, std::uint64_t seed) {
          const Tensor32 feats = from_numpy<float>(f);
          if (feats.rank() != 4) throw ShapeError("project: features must be frames x H x W x D");
          ProjectorConfig cfg;
          cfg.kind = parse_projector_kind(kind);
          cfg.c_in = feats.dim(3);
          cfg.c_out = embed_dim;
          cfg.c_hidden = hidden.value_or(embed_dim);
          cfg.grid_in_h = feats.dim(1);
          cfg.grid_in_w = feats.dim(2);
          cfg.grid_out_h = cfg.kind == ProjectorKind::mlp_proj ? cfg.grid_in_h : grid_out;
          cfg.grid_out_w = cfg.kind == ProjectorKind::mlp_proj ? cfg.grid_in_w : grid_out;
          const auto params = init_projector<float>(cfg, seed);
          return to_numpy(project_branch(feats, Branch::image, cfg, params).tokens);
        },
        py::arg("features"), py::arg("kind") = "et_proj", py::arg("grid_out") = 12, py::arg("embed_dim") = 896,
        py::arg("hidden") = py::none(), py::arg("seed") = 0,
        "Project frames x H x W x D features to 1 x M x embed_dim tokens with freshly initialised weights.");

  m.def("default_config", [] { return to_py(to_json(PipelineConfig{})); });

  m.def("token_budget", [](const py::object& cfg) { return to_py(to_json(token_budget(config_from(cfg)))); },
        py::arg("config") = py::none());

  m.def("mac_report", [](const py::object& cfg) { return to_py(to_json(mac_report(config_from(cfg)))); },
        py::arg("config") = py::none());

  m.def("stage_plan", [](int stage) { return to_py(to_json(stage_plan(stage))); }, py::arg("stage"));

  m.def("run_pipeline",
        [](const py::object& cfg_obj, std::size_t threads) {
          const PipelineConfig cfg = config_from(cfg_obj);
          PipelineResult r;
          {
            py::gil_scoped_release release;
            r = run_pipeline(cfg, {}, {threads});
          }
          py::dict out = to_py(run_report(cfg, r));
          out["tokens"] = to_numpy(r.tokens);
          return out;
        },
        py::arg("config") = py::none(), py::arg("threads") = 1,
        "Run the pipeline; returns the run report with the fused token array under 'tokens'.");

  m.def("write_features",
        [](const std::string& path, const py::array& a) {
          if (a.dtype().is(py::dtype::of<double>())) {
            write_features(path, from_numpy<double>(a.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>()));
          } else {
            write_features(path, from_numpy<float>(a.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>()));
          }
        },
        py::arg("path"), py::arg("array"), "Write a float32 or float64 array as MVGF.");

  m.def("read_features",
        [](const std::string& path) -> py::array {
          return std::visit([](const auto& t) -> py::array { return to_numpy(t); }, read_features(path));
        },
        py::arg("path"));

  m.def("gradcheck",
        [](std::size_t seeds) {
          GradcheckOptions opts;
          opts.seeds = seeds;
          py::list out;
          for (const auto& r : run_gradchecks(opts)) {
            py::dict d;
            d["op"] = r.op;
            d["max_rel_error"] = r.max_rel_error;
            d["passed"] = r.passed;
            out.append(d);
          }
          return out;
        },
        py::arg("seeds") = 3);
}
