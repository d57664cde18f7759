// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "author2vec/nn/params.hpp"

namespace a2v::nn {

struct BlockError {
  std::string name;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double tolerance = 0.0;

  double max_relative_error() const {
    double worst = 0.0;
    for (const auto& b : blocks) worst = std::max(worst, b.max_relative_error);
    return worst;
  }
  bool passed() const { return max_relative_error() < tolerance; }
};

struct GradCheckOptions {
  double epsilon = 1e-6;
  double tolerance = 1e-6;
  /// Denominator floor: |a - n| / max(|a|, |n|, floor). Keeps entries whose
  /// true gradient is ~0 from reporting rounding noise as relative error.
  double floor = 1e-8;
  /// Check at most this many entries per block (evenly strided); 0 = all.
  std::size_t max_entries_per_block = 0;
};

/// `loss` must be deterministic and read the parameters through `params`.
template <typename T>
GradCheckReport grad_check(const std::function<T()>& loss, const std::vector<ParamRef<T>>& params,
                           const std::vector<Matrix<T>>& analytic, const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& value = *params[b].value;
    const auto& grad = analytic.at(b);
    BlockError err{params[b].name};
    const auto n = value.size();
    const Eigen::Index stride =
        (opt.max_entries_per_block == 0 || static_cast<std::size_t>(n) <= opt.max_entries_per_block)
            ? 1
            : n / static_cast<Eigen::Index>(opt.max_entries_per_block);
    for (Eigen::Index i = 0; i < n; i += stride) {
      const T saved = value.data()[i];
      value.data()[i] = saved + static_cast<T>(opt.epsilon);
      const double plus = static_cast<double>(loss());
      value.data()[i] = saved - static_cast<T>(opt.epsilon);
      const double minus = static_cast<double>(loss());
      value.data()[i] = saved;
      const double numeric = (plus - minus) / (2.0 * opt.epsilon);
      const double a = static_cast<double>(grad.data()[i]);
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      err.max_absolute_error = std::max(err.max_absolute_error, abs_err);
      err.max_relative_error = std::max(err.max_relative_error, abs_err / denom);
    }
    report.blocks.push_back(std::move(err));
  }
  return report;
}

}  // namespace a2v::nn
