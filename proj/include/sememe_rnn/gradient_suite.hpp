// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of every cell variant: a scalar loss over a
// short random sequence is checked against central differences for each
// parameter tensor and for each knowledge input.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sememe_rnn/cells.hpp"

namespace sememe::cells {

struct GradientCheckRow {
  CellVariant variant;
  std::string tensor;  // parameter name, or "pi[t]"
  double max_relative_error = 0.0;
};

struct GradientSuiteOptions {
  Index dim = 4;  // d_x = d_h = d_pi
  int steps = 3;
  double eps = 1e-5;
  std::uint64_t seed = 7;
};

/// Weights and inputs drawn uniformly from [-1, 1].
CellWeights random_weights(CellVariant variant, CellDims dims, std::uint64_t seed);

std::vector<GradientCheckRow> gradient_suite(CellVariant variant,
                                             const GradientSuiteOptions& options = {});
std::vector<GradientCheckRow> gradient_suite_all(const GradientSuiteOptions& options = {});

}  // namespace sememe::cells
