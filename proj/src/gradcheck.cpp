#include "framescope/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "framescope/errors.hpp"
#include "framescope/numerics.hpp"
#include "framescope/projector.hpp"
#include "framescope/splitmix.hpp"

namespace framescope {

namespace {

struct Problem {
  std::vector<Tensor64*> tensors;
  std::function<Tensor64()> forward;
  // Gradients in the same order as `tensors`.
  std::function<std::vector<Tensor64>(const Tensor64& upstream)> backward;
};

// Owns the storage a Problem points into.
struct Storage {
  std::vector<Tensor64> inputs;
  LinearParams<double> l1, l2;
  ConvParams<double> conv;
  ProjectorConfig pcfg;
  ProjectorParams<double> proj;
};

std::size_t pick(SplitMix64& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Tensor64 random_tensor(SplitMix64& rng, Shape shape) {
  Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

LinearParams<double> random_linear(SplitMix64& rng, std::size_t in, std::size_t out) {
  return {random_tensor(rng, {in, out}), random_tensor(rng, {out})};
}

double loss(const Tensor64& y) {
  double s = 0.0;
  for (double v : y.data()) s += v * v;
  return s;
}

Problem make_problem(const std::string& op, SplitMix64& rng, Storage& st) {
  Problem p;
  if (op == "matmul") {
    const std::size_t m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    st.inputs = {random_tensor(rng, {m, k}), random_tensor(rng, {k, n})};
    p.tensors = {&st.inputs[0], &st.inputs[1]};
    p.forward = [&st] { return matmul(st.inputs[0], st.inputs[1]); };
    p.backward = [&st](const Tensor64& up) {
      auto g = matmul_grad(st.inputs[0], st.inputs[1], up);
      return std::vector<Tensor64>{std::move(g.a), std::move(g.b)};
    };
  } else if (op == "linear") {
    const std::size_t n = pick(rng, 1, 5), in = pick(rng, 1, 5), out = pick(rng, 1, 5);
    st.inputs = {random_tensor(rng, {n, in})};
    st.l1 = random_linear(rng, in, out);
    p.tensors = {&st.inputs[0], &st.l1.weight, &st.l1.bias};
    p.forward = [&st] { return linear(st.inputs[0], st.l1); };
    p.backward = [&st](const Tensor64& up) {
      auto g = linear_grad(st.inputs[0], st.l1, up);
      return std::vector<Tensor64>{std::move(g.input), std::move(g.params.weight), std::move(g.params.bias)};
    };
  } else if (op == "ffn") {
    const std::size_t b = pick(rng, 1, 2), n = pick(rng, 1, 4);
    const std::size_t in = pick(rng, 1, 5), hid = pick(rng, 1, 5), out = pick(rng, 1, 5);
    st.inputs = {random_tensor(rng, {b, n, in})};
    st.l1 = random_linear(rng, in, hid);
    st.l2 = random_linear(rng, hid, out);
    p.tensors = {&st.inputs[0], &st.l1.weight, &st.l1.bias, &st.l2.weight, &st.l2.bias};
    p.forward = [&st] { return ffn_forward(st.inputs[0], st.l1, st.l2); };
    p.backward = [&st](const Tensor64& up) {
      auto g = ffn_grad(st.inputs[0], st.l1, st.l2, up);
      return std::vector<Tensor64>{std::move(g.input), std::move(g.p1.weight), std::move(g.p1.bias),
                                   std::move(g.p2.weight), std::move(g.p2.bias)};
    };
  } else if (op == "adaptive_pool") {
    const std::size_t c = pick(rng, 1, 3), h = pick(rng, 1, 7), w = pick(rng, 1, 7);
    const std::size_t oh = pick(rng, 1, h), ow = pick(rng, 1, w);
    st.inputs = {random_tensor(rng, {c, h, w})};
    p.tensors = {&st.inputs[0]};
    p.forward = [&st, oh, ow] { return adaptive_avg_pool2d(st.inputs[0], oh, ow); };
    p.backward = [&st](const Tensor64& up) { return std::vector<Tensor64>{pool_grad(st.inputs[0].shape(), up)}; };
  } else if (op == "depthwise_conv") {
    const std::size_t c = pick(rng, 1, 3), h = pick(rng, 1, 5), w = pick(rng, 1, 5);
    st.inputs = {random_tensor(rng, {c, h, w})};
    st.conv = {random_tensor(rng, {c, 3, 3}), random_tensor(rng, {c})};
    p.tensors = {&st.inputs[0], &st.conv.kernel, &st.conv.bias};
    p.forward = [&st] { return depthwise_conv3x3(st.inputs[0], st.conv); };
    p.backward = [&st](const Tensor64& up) {
      auto g = conv_grad(st.inputs[0], st.conv, up);
      return std::vector<Tensor64>{std::move(g.input), std::move(g.params.kernel), std::move(g.params.bias)};
    };
  } else if (op == "et_proj" || op == "mlp_proj") {
    ProjectorConfig& c = st.pcfg;
    c.kind = op == "et_proj" ? ProjectorKind::et_proj : ProjectorKind::mlp_proj;
    c.c_in = pick(rng, 1, 4);
    c.c_hidden = pick(rng, 1, 4);
    c.c_out = pick(rng, 1, 4);
    c.grid_in_h = pick(rng, 1, 5);
    c.grid_in_w = pick(rng, 1, 5);
    c.grid_out_h = c.kind == ProjectorKind::et_proj ? pick(rng, 1, c.grid_in_h) : c.grid_in_h;
    c.grid_out_w = c.kind == ProjectorKind::et_proj ? pick(rng, 1, c.grid_in_w) : c.grid_in_w;
    const std::size_t b = pick(rng, 1, 2);
    st.inputs = {random_tensor(rng, {b, c.tokens_in(), c.c_in})};
    st.proj.ffn1 = random_linear(rng, c.c_in, c.c_hidden);
    st.proj.ffn2 = random_linear(rng, c.c_hidden, c.c_out);
    p.tensors = {&st.inputs[0], &st.proj.ffn1.weight, &st.proj.ffn1.bias, &st.proj.ffn2.weight,
                 &st.proj.ffn2.bias};
    if (c.kind == ProjectorKind::et_proj) {
      st.proj.posenc = ConvParams<double>{random_tensor(rng, {c.c_out, 3, 3}), random_tensor(rng, {c.c_out})};
      p.tensors.push_back(&st.proj.posenc->kernel);
      p.tensors.push_back(&st.proj.posenc->bias);
    }
    p.forward = [&st] { return projector_forward(st.inputs[0], st.pcfg, st.proj); };
    p.backward = [&st](const Tensor64& up) {
      auto g = projector_backward(st.inputs[0], st.pcfg, st.proj, up);
      std::vector<Tensor64> out{std::move(g.input), std::move(g.params.ffn1.weight), std::move(g.params.ffn1.bias),
                                std::move(g.params.ffn2.weight), std::move(g.params.ffn2.bias)};
      if (g.params.posenc) {
        out.push_back(std::move(g.params.posenc->kernel));
        out.push_back(std::move(g.params.posenc->bias));
      }
      return out;
    };
  } else {
    throw ArgumentError("gradcheck: unknown op '" + op + "'");
  }
  return p;
}

double relative_error(const Tensor64& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  if (denom < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

GradcheckTrial run_trial(const std::string& op, std::uint64_t seed, const GradcheckOptions& opts) {
  SplitMix64 rng(seed ^ 0x6772616463686B00ULL);
  Storage st;
  Problem p = make_problem(op, rng, st);

  const Tensor64 y = p.forward();
  Tensor64 upstream = y;
  for (double& v : upstream.data()) v *= 2.0;
  std::vector<Tensor64> analytic = p.backward(upstream);
  if (opts.inject_fault && *opts.inject_fault == op) {
    analytic.front()[0] += 1e-2 * (1.0 + std::abs(analytic.front()[0]));
  }

  GradcheckTrial trial;
  trial.seed = seed;
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    Tensor64& param = *p.tensors[t];
    std::vector<double> numeric(param.numel());
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const double orig = param[i];
      param[i] = orig + opts.step;
      const double up = loss(p.forward());
      param[i] = orig - opts.step;
      const double down = loss(p.forward());
      param[i] = orig;
      numeric[i] = (up - down) / (2.0 * opts.step);
    }
    trial.max_rel_error = std::max(trial.max_rel_error, relative_error(analytic[t], numeric));
    trial.elements_checked += param.numel();
  }
  trial.passed = trial.max_rel_error < opts.tolerance;
  return trial;
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {"matmul",         "linear",  "ffn",     "adaptive_pool",
                                               "depthwise_conv", "et_proj", "mlp_proj"};
  return ops;
}

GradcheckResult gradcheck_op(const std::string& op, const GradcheckOptions& opts) {
  if (opts.seeds == 0) throw ArgumentError("gradcheck: at least one seed is required");
  GradcheckResult r;
  r.op = op;
  r.passed = true;
  for (std::size_t s = 0; s < opts.seeds; ++s) {
    GradcheckTrial t = run_trial(op, opts.base_seed + s, opts);
    r.max_rel_error = std::max(r.max_rel_error, t.max_rel_error);
    r.passed = r.passed && t.passed;
    r.trials.push_back(t);
  }
  return r;
}

std::vector<GradcheckResult> run_gradchecks(const GradcheckOptions& opts) {
  if (opts.inject_fault) {
    const auto& ops = gradcheck_ops();
    if (std::find(ops.begin(), ops.end(), *opts.inject_fault) == ops.end()) {
      throw ArgumentError("gradcheck: cannot inject fault into unknown op '" + *opts.inject_fault + "'");
    }
  }
  std::vector<GradcheckResult> out;
  for (const auto& op : gradcheck_ops()) out.push_back(gradcheck_op(op, opts));
  return out;
}

}  // namespace framescope
