#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace smcnet {

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  /// Denominator floor for tensors whose true gradient vanishes (conv bias ahead of batch norm).
  double scale_floor = 1e-5;
  /// Negative control: scale the conv weight gradient by 1.01 after backward.
  bool corrupt_conv_backward = false;
};

struct GradCheckResult {
  std::string layer;
  std::string tensor;
  double max_rel_error = 0;
  bool passed = false;
};

/// ||analytic - numeric||_inf / max(||analytic||_inf, ||numeric||_inf, floor); 0 when all vanish.
double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 0.0);

/// Central differences of `loss` with respect to every scalar of `values`, restoring each afterwards.
std::vector<double> numeric_gradient(const std::function<double()>& loss, std::span<double> values, double step);

/// Finite-difference checks (f64) of every layer and a composed two-conv micro-net on a 1x8x8 input.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace smcnet
