#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include <json.hpp>

namespace vth {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t coordinates = 200;
  double step = 1e-6;
  double tolerance = 1e-4;
  // Denominator floor of the relative error: coordinates whose true
  // gradient is below this are compared in absolute terms.
  double scale_floor = 1e-6;
  bool train_mode = false;
  // Test hook: doubles the analytic gradient at this index and forces it
  // into the checked set.
  std::optional<std::size_t> corrupt_index;
};

struct GradcheckReport {
  std::uint64_t seed = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;

  nlohmann::json to_json() const;
  friend bool operator==(const GradcheckReport&, const GradcheckReport&) = default;
};

// Compares the analytic gradient of |q - q_hat(E, T(theta), alpha)| through
// the P-net and mixing function against central differences on a random
// parameter set, patch and target. Coordinates are drawn per tensor so every
// layer is represented. Perturbations that flip a relu or max-pool decision
// are resampled, since the finite difference is meaningless across a kink.
GradcheckReport gradcheck(const GradcheckOptions& options);

}  // namespace vth
