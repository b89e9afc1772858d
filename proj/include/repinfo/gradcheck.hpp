#pragma once

#include "repinfo/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace repinfo {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Parameters whose finite-difference probe kept crossing a (leaky-)ReLU
  // kink even after shrinking the step; they are excluded from the max.
  std::size_t skipped_kinks = 0;
};

/// Compares backward() against central differences of the train-mode loss on
/// every parameter of init_network(spec, seed). Dropout masks are frozen
/// after the first pass. Relative error is |a-n| / max(|a|, |n|, 1e-6).
GradCheckReport gradient_check(const NetworkSpec& spec, std::uint64_t seed, double step,
                               int batch_rows = 8);

struct GradCheckCase {
  std::string name;
  NetworkSpec spec;
  double tolerance = 1e-4;
};

/// Small networks covering every layer kind; batch-norm cases carry the
/// looser 1e-3 tolerance.
std::vector<GradCheckCase> standard_gradcheck_suite();

}  // namespace repinfo
