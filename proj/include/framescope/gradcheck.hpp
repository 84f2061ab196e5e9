#pragma once

// Finite-difference verification of the analytic backward passes.
//
// For each op and seed a small random f64 problem is drawn, the loss
// L = sum(y^2) is differentiated analytically (upstream = 2y) and by central
// differences (L(v+h) - L(v-h)) / 2h on every input and parameter element.
// Per tensor the error is ||analytic - numeric|| / (||analytic|| + ||numeric||);
// a trial passes when the worst tensor is below the tolerance.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace framescope {

struct GradcheckOptions {
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  double step = 1e-4;
  double tolerance = 1e-4;
  // Test hook: corrupt the analytic gradient of this op.
  std::optional<std::string> inject_fault;
};

struct GradcheckTrial {
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::size_t elements_checked = 0;
  bool passed = false;
};

struct GradcheckResult {
  std::string op;
  std::vector<GradcheckTrial> trials;
  double max_rel_error = 0.0;
  bool passed = false;
};

// matmul, linear, ffn, adaptive_pool, depthwise_conv, et_proj, mlp_proj
const std::vector<std::string>& gradcheck_ops();

GradcheckResult gradcheck_op(const std::string& op, const GradcheckOptions& opts = {});
std::vector<GradcheckResult> run_gradchecks(const GradcheckOptions& opts = {});

}  // namespace framescope
