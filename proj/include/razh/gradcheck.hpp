#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "razh/tape.hpp"

namespace razh {

/// Builds the loss graph on the given tape and returns the 1x1 loss node.
/// Must be deterministic given the store contents.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

/// Compares tape gradients against central finite differences over sampled
/// coordinates. Relative error is |g_a - g_fd| / max(1, |g_fd|).
/// max_coords_per_param = 0 checks every coordinate.
GradCheckResult finite_diff_check(const LossBuilder& loss_fn, ParamStore& params,
                                  double epsilon = 1e-5,
                                  std::size_t max_coords_per_param = 0,
                                  std::uint64_t seed = 0);

} // namespace razh
