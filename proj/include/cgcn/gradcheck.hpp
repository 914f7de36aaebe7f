#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cgcn {

inline constexpr double kGradCheckTol = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

struct GradCheckResult {
  std::string layer;
  double max_rel_err = 0.0;
  bool pass = false;
};

std::vector<std::string> gradcheck_layer_names();

/// Central finite-difference checks for every layer, the full block and the
/// full nine-block desk model. `layers` empty = all. `inject_wrong_sign`
/// flips one analytic gradient entry per layer (negative control).
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed,
                                           const std::vector<std::string>& layers = {},
                                           bool inject_wrong_sign = false);

}  // namespace cgcn
