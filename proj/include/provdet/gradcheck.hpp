#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "provdet/contrastive.hpp"
#include "provdet/encoder.hpp"

namespace provdet {

struct GradCheckOptions {
  double tolerance = 1e-5;
  double step = 1e-5;  // central difference half-width
  std::size_t coords_per_block = 20;
  // Relative error is |a - n| / max(|a|, |n|, floor). The floor keeps
  // coordinates whose true gradient is ~0 from amplifying rounding noise.
  double denominator_floor = 1e-4;
  std::uint64_t seed = 0;
};

struct BlockCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
  std::size_t worst_index = 0;  // flat index of the worst coordinate
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0;

  bool passed() const;
  double max_rel_error() const;
  std::vector<std::string> failing_blocks() const;
};

double relative_error(double analytic, double numeric, double floor);

// Compares `analytic` against central differences of `loss` at `x`.
// Per block, up to coords_per_block coordinates are drawn: half from those
// with a nonzero analytic gradient (where the check is informative), the
// rest uniformly; blocks no larger than coords_per_block are checked
// exhaustively. `x` is perturbed in place and restored.
GradCheckReport check_gradient(std::span<double> x, std::span<const ParamBlock> blocks,
                               const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic, const GradCheckOptions& options);

// Gradient check of the combined batch loss with respect to every parameter
// block. Dropout masks and negatives are fixed by `batch_seed`, so the loss
// is a deterministic function of the parameters.
GradCheckReport gradient_check(ModelParams<double>& params, std::span<const Example> batch,
                               const LossConfig& loss_config, std::uint64_t batch_seed,
                               const GradCheckOptions& options = {});

}  // namespace provdet
