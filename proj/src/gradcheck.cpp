#include "provdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "provdet/rng.hpp"

namespace provdet {

bool GradCheckReport::passed() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.passed; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
  return m;
}

std::vector<std::string> GradCheckReport::failing_blocks() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (!b.passed) out.push_back(b.name);
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return denom == 0 ? 0 : std::fabs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_coordinates(const ParamBlock& block, std::span<const double> analytic,
                                          std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(block.size());
  std::iota(all.begin(), all.end(), block.offset);
  if (all.size() <= count) return all;

  std::vector<std::size_t> nonzero;
  for (const std::size_t i : all) {
    if (analytic[i] != 0.0) nonzero.push_back(i);
  }
  std::vector<std::size_t> chosen;
  rng.shuffle(std::span<std::size_t>(nonzero));
  const std::size_t from_nonzero = std::min(nonzero.size(), count / 2);
  chosen.assign(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(from_nonzero));

  rng.shuffle(std::span<std::size_t>(all));
  for (const std::size_t i : all) {
    if (chosen.size() == count) break;
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

GradCheckReport check_gradient(std::span<double> x, std::span<const ParamBlock> blocks,
                               const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic, const GradCheckOptions& options) {
  if (analytic.size() != x.size()) throw ValidationError("check_gradient: gradient size mismatch");
  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (const auto& block : blocks) {
    if (block.offset + block.size() > x.size()) throw ValidationError("check_gradient: block out of range");
    BlockCheck bc;
    bc.name = block.name;
    for (const std::size_t i : pick_coordinates(block, analytic, options.coords_per_block, rng)) {
      const double saved = x[i];
      x[i] = saved + options.step;
      const double up = loss(x);
      x[i] = saved - options.step;
      const double down = loss(x);
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double rel = relative_error(analytic[i], numeric, options.denominator_floor);
      ++bc.checked;
      bc.max_abs_error = std::max(bc.max_abs_error, std::fabs(analytic[i] - numeric));
      if (bc.checked == 1 || rel > bc.max_rel_error) {
        bc.max_rel_error = rel;
        bc.worst_index = i;
      }
    }
    bc.passed = bc.max_rel_error <= options.tolerance;
    report.blocks.push_back(std::move(bc));
  }
  return report;
}

GradCheckReport gradient_check(ModelParams<double>& params, std::span<const Example> batch,
                               const LossConfig& loss_config, std::uint64_t batch_seed,
                               const GradCheckOptions& options) {
  std::vector<double> analytic(params.values.size(), 0.0);
  batch_loss<double>(params, batch, loss_config, batch_seed, analytic);
  const auto loss = [&](std::span<const double>) {
    return batch_loss<double>(params, batch, loss_config, batch_seed).total;
  };
  return check_gradient(params.values, params.layout.blocks(), loss, analytic, options);
}

}  // namespace provdet
