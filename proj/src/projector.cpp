#include "framescope/projector.hpp"

#include <cmath>
#include <cstring>

#include "framescope/parallel.hpp"

namespace framescope {

namespace {

// role-specific sub-seed so each parameter tensor draws its own stream
std::uint64_t role_seed(std::uint64_t seed, std::uint64_t role) { return seed ^ frame_hash(role); }

template <Real T>
Tensor<T> slice_batch(const Tensor<T>& x, std::size_t b) {
  const std::size_t per = x.numel() / x.dim(0);
  Shape shape(x.shape().begin() + 1, x.shape().end());
  return Tensor<T>(shape, std::vector<T>(x.data().begin() + b * per, x.data().begin() + (b + 1) * per));
}

template <Real T>
void check_input(const Tensor<T>& x, const ProjectorConfig& cfg, const char* op) {
  if (x.rank() != 3 || x.dim(1) != cfg.tokens_in() || x.dim(2) != cfg.c_in) {
    throw ShapeError(std::string(op) + ": input " + shape_str(x.shape()) + " does not match B x " +
                     std::to_string(cfg.tokens_in()) + " (" + std::to_string(cfg.grid_in_h) + "x" +
                     std::to_string(cfg.grid_in_w) + ") x " + std::to_string(cfg.c_in));
  }
}

}  // namespace

std::string to_string(ProjectorKind kind) { return kind == ProjectorKind::et_proj ? "et_proj" : "mlp_proj"; }

ProjectorKind parse_projector_kind(const std::string& s) {
  if (s == "et_proj" || s == "et") return ProjectorKind::et_proj;
  if (s == "mlp_proj" || s == "mlp") return ProjectorKind::mlp_proj;
  throw ArgumentError("unknown projector kind '" + s + "' (expected et_proj or mlp_proj)");
}

std::string to_string(Branch b) { return b == Branch::image ? "image" : "video"; }

void ProjectorConfig::validate() const {
  if (c_in == 0 || c_hidden == 0 || c_out == 0 || grid_in_h == 0 || grid_in_w == 0 || grid_out_h == 0 ||
      grid_out_w == 0) {
    throw ArgumentError("projector config: all channel and grid sizes must be positive");
  }
  if (grid_out_h > grid_in_h || grid_out_w > grid_in_w) {
    throw ArgumentError("projector config: output grid " + std::to_string(grid_out_h) + "x" +
                        std::to_string(grid_out_w) + " exceeds input grid " + std::to_string(grid_in_h) +
                        "x" + std::to_string(grid_in_w));
  }
  if (kind == ProjectorKind::mlp_proj && (grid_out_h != grid_in_h || grid_out_w != grid_in_w)) {
    throw ArgumentError("projector config: mlp_proj keeps the token grid; grid_out must equal grid_in");
  }
}

template <Real T>
void ProjectorParams<T>::validate(const ProjectorConfig& cfg) const {
  ffn1.validate();
  ffn2.validate();
  if (ffn1.in_features() != cfg.c_in || ffn1.out_features() != cfg.c_hidden ||
      ffn2.in_features() != cfg.c_hidden || ffn2.out_features() != cfg.c_out) {
    throw ShapeError("projector params: FFN weights " + shape_str(ffn1.weight.shape()) + ", " +
                     shape_str(ffn2.weight.shape()) + " do not match config");
  }
  if (cfg.kind == ProjectorKind::et_proj) {
    if (!posenc) throw ShapeError("projector params: et_proj requires positional-encoding weights");
    posenc->validate();
    if (posenc->channels() != cfg.c_out) {
      throw ShapeError("projector params: positional encoding has " + std::to_string(posenc->channels()) +
                       " channels, expected " + std::to_string(cfg.c_out));
    }
  } else if (posenc) {
    throw ShapeError("projector params: mlp_proj takes no positional-encoding weights");
  }
}

template <Real T>
ProjectorParams<T> init_projector(const ProjectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ProjectorParams<T> p;
  p.ffn1 = {synth_uniform<T>(role_seed(seed, 1), {cfg.c_in, cfg.c_hidden},
                             1.0 / std::sqrt(static_cast<double>(cfg.c_in))),
            Tensor<T>({cfg.c_hidden})};
  p.ffn2 = {synth_uniform<T>(role_seed(seed, 2), {cfg.c_hidden, cfg.c_out},
                             1.0 / std::sqrt(static_cast<double>(cfg.c_hidden))),
            Tensor<T>({cfg.c_out})};
  if (cfg.kind == ProjectorKind::et_proj) {
    p.posenc = ConvParams<T>{Tensor<T>({cfg.c_out, 3, 3}), Tensor<T>({cfg.c_out})};
  }
  return p;
}

template <Real T>
Tensor<T> et_proj_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p) {
  if (cfg.kind != ProjectorKind::et_proj) throw ArgumentError("et_proj_forward: config kind is mlp_proj");
  cfg.validate();
  check_input(x, cfg, "et_proj_forward");
  p.validate(cfg);
  const std::size_t batch = x.dim(0), m = cfg.tokens_out(), c = cfg.c_out;

  const Tensor<T> y = ffn_forward(x, p.ffn1, p.ffn2);
  Tensor<T> out({batch, m, c});
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor<T> map = transpose(slice_batch(y, b)).reshaped({c, cfg.grid_in_h, cfg.grid_in_w});
    Tensor<T> pooled = adaptive_avg_pool2d(map, cfg.grid_out_h, cfg.grid_out_w);
    const Tensor<T> pos = depthwise_conv3x3(pooled, *p.posenc);
    for (std::size_t i = 0; i < pooled.numel(); ++i) pooled[i] += pos[i];
    const Tensor<T> tokens = transpose(std::move(pooled).reshaped({c, m}));
    std::memcpy(out.data().data() + b * m * c, tokens.data().data(), m * c * sizeof(T));
  }
  return out;
}

template <Real T>
Tensor<T> mlp_proj_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p) {
  if (cfg.kind != ProjectorKind::mlp_proj) throw ArgumentError("mlp_proj_forward: config kind is et_proj");
  cfg.validate();
  check_input(x, cfg, "mlp_proj_forward");
  p.validate(cfg);
  return ffn_forward(x, p.ffn1, p.ffn2);
}

template <Real T>
Tensor<T> projector_forward(const Tensor<T>& x, const ProjectorConfig& cfg, const ProjectorParams<T>& p) {
  return cfg.kind == ProjectorKind::et_proj ? et_proj_forward(x, cfg, p) : mlp_proj_forward(x, cfg, p);
}

template <Real T>
ProjectorGrads<T> projector_backward(const Tensor<T>& x, const ProjectorConfig& cfg,
                                     const ProjectorParams<T>& p, const Tensor<T>& upstream) {
  cfg.validate();
  check_input(x, cfg, "projector_backward");
  p.validate(cfg);
  const std::size_t batch = x.dim(0), n = cfg.tokens_in(), m = cfg.tokens_out(), c = cfg.c_out;
  if (upstream.shape() != Shape{batch, m, c}) {
    throw ShapeError("projector_backward: upstream " + shape_str(upstream.shape()) +
                     " does not match output shape");
  }

  if (cfg.kind == ProjectorKind::mlp_proj) {
    FfnGrads<T> g = ffn_grad(x, p.ffn1, p.ffn2, upstream);
    return {std::move(g.input), {std::move(g.p1), std::move(g.p2), std::nullopt}};
  }

  const Tensor<T> y = ffn_forward(x, p.ffn1, p.ffn2);
  ConvParams<T> dpos{Tensor<T>(p.posenc->kernel.shape()), Tensor<T>(p.posenc->bias.shape())};
  Tensor<T> dy({batch, n, c});
  const Shape map_shape{c, cfg.grid_in_h, cfg.grid_in_w};
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor<T> map = transpose(slice_batch(y, b)).reshaped(map_shape);
    const Tensor<T> pooled = adaptive_avg_pool2d(map, cfg.grid_out_h, cfg.grid_out_w);
    const Tensor<T> dout = transpose(slice_batch(upstream, b)).reshaped(pooled.shape());
    ConvGrads<T> cg = conv_grad(pooled, *p.posenc, dout);
    Tensor<T> dpooled = dout;
    for (std::size_t i = 0; i < dpooled.numel(); ++i) dpooled[i] += cg.input[i];
    for (std::size_t i = 0; i < dpos.kernel.numel(); ++i) dpos.kernel[i] += cg.params.kernel[i];
    for (std::size_t i = 0; i < dpos.bias.numel(); ++i) dpos.bias[i] += cg.params.bias[i];
    const Tensor<T> dmap = pool_grad(map_shape, dpooled);
    const Tensor<T> dtok = transpose(dmap.reshaped({c, n}));
    std::memcpy(dy.data().data() + b * n * c, dtok.data().data(), n * c * sizeof(T));
  }
  FfnGrads<T> g = ffn_grad(x, p.ffn1, p.ffn2, dy);
  return {std::move(g.input), {std::move(g.p1), std::move(g.p2), std::move(dpos)}};
}

#define FRAMESCOPE_INSTANTIATE(T)                                                                        \
  template struct ProjectorParams<T>;                                                                    \
  template ProjectorParams<T> init_projector(const ProjectorConfig&, std::uint64_t);                     \
  template Tensor<T> et_proj_forward(const Tensor<T>&, const ProjectorConfig&, const ProjectorParams<T>&); \
  template Tensor<T> mlp_proj_forward(const Tensor<T>&, const ProjectorConfig&, const ProjectorParams<T>&); \
  template Tensor<T> projector_forward(const Tensor<T>&, const ProjectorConfig&, const ProjectorParams<T>&); \
  template ProjectorGrads<T> projector_backward(const Tensor<T>&, const ProjectorConfig&,                \
                                                const ProjectorParams<T>&, const Tensor<T>&);

FRAMESCOPE_INSTANTIATE(float)
FRAMESCOPE_INSTANTIATE(double)

#undef FRAMESCOPE_INSTANTIATE

TokenSequence project_branch(const Tensor32& features, Branch branch, const ProjectorConfig& cfg,
                             const ProjectorParams<float>& p, std::size_t threads) {
  cfg.validate();
  if (features.rank() != 4 || features.dim(1) != cfg.grid_in_h || features.dim(2) != cfg.grid_in_w ||
      features.dim(3) != cfg.c_in) {
    throw ShapeError("project_branch: " + to_string(branch) + " features " + shape_str(features.shape()) +
                     " do not match projector grid " + std::to_string(cfg.grid_in_h) + "x" +
                     std::to_string(cfg.grid_in_w) + " with " + std::to_string(cfg.c_in) + " channels");
  }
  p.validate(cfg);
  const std::size_t frames = features.dim(0), n = cfg.tokens_in(), m = cfg.tokens_out(), c = cfg.c_out;
  const std::size_t in_per_frame = n * cfg.c_in;
  Tensor32 out({1, frames * m, c});
  parallel_for(frames, threads, [&](std::size_t f) {
    Tensor32 x({1, n, cfg.c_in}, std::vector<float>(features.data().begin() + f * in_per_frame,
                                                    features.data().begin() + (f + 1) * in_per_frame));
    const Tensor32 y = projector_forward(x, cfg, p);
    std::memcpy(out.data().data() + f * m * c, y.data().data(), m * c * sizeof(float));
  });
  return {std::move(out), branch};
}

TokenSequence project_branch(const FrameFeatures& f, const ProjectorConfig& cfg, const ProjectorParams<float>& p,
                             std::size_t threads) {
  return project_branch(f.tensor, Branch::image, cfg, p, threads);
}

TokenSequence project_branch(const VideoFeatures& f, const ProjectorConfig& cfg, const ProjectorParams<float>& p,
                             std::size_t threads) {
  return project_branch(f.tensor, Branch::video, cfg, p, threads);
}

std::uint64_t projector_macs_per_frame(const ProjectorConfig& cfg) {
  const std::uint64_t n = cfg.tokens_in();
  std::uint64_t macs = matmul_macs(n, cfg.c_in, cfg.c_hidden) + matmul_macs(n, cfg.c_hidden, cfg.c_out);
  if (cfg.kind == ProjectorKind::et_proj) {
    macs += pool_macs(cfg.c_out, cfg.grid_out_h, cfg.grid_out_w);
    macs += conv3x3_macs(cfg.c_out, cfg.grid_out_h, cfg.grid_out_w);
  }
  return macs;
}

}  // namespace framescope
