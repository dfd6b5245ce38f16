#pragma once

#include <string>
#include <vector>

namespace fanet {

struct GradSuiteEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central-difference checks (double precision, h = 1e-5) of every
/// differentiable op, of the backbone components, and of the whole model.
std::vector<GradSuiteEntry> gradcheck_ops();
std::vector<GradSuiteEntry> gradcheck_block();
/// Backbone + head + cross-entropy on a 1x3x32x32 input, one block per stage.
std::vector<GradSuiteEntry> gradcheck_model();

/// Dispatches "ops", "block" or "model"; anything else is a ValidationError.
std::vector<GradSuiteEntry> gradcheck_scope(const std::string& scope);

}  // namespace fanet
