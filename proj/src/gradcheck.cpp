#include "razh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace razh {

namespace {

double eval_loss(const LossBuilder& loss_fn, ParamStore& params) {
    Tape tape(&params);
    Var loss = loss_fn(tape, params);
    return tape.value(loss)[0];
}

} // namespace

GradCheckResult finite_diff_check(const LossBuilder& loss_fn, ParamStore& params,
                                  double epsilon, std::size_t max_coords_per_param,
                                  std::uint64_t seed) {
    // Determinism gate: same store, same loss, bit-exact.
    const double l0 = eval_loss(loss_fn, params);
    const double l1 = eval_loss(loss_fn, params);
    if (l0 != l1)
        throw usage_error("finite_diff_check: loss function is not deterministic");

    params.zero_grads();
    {
        Tape tape(&params);
        Var loss = loss_fn(tape, params);
        tape.backward(loss);
    }

    std::mt19937_64 rng(seed);
    GradCheckResult result;
    for (const std::string& name : params.names()) {
        Tensor2& value = params.value(name);
        const Tensor2& analytic = params.grad(name);

        std::vector<std::size_t> coords(value.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (max_coords_per_param > 0 && coords.size() > max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords_per_param);
        }

        for (std::size_t c : coords) {
            const double saved = value[c];
            value[c] = saved + epsilon;
            const double lp = eval_loss(loss_fn, params);
            value[c] = saved - epsilon;
            const double lm = eval_loss(loss_fn, params);
            value[c] = saved;

            const double fd = (lp - lm) / (2.0 * epsilon);
            const double rel = std::fabs(analytic[c] - fd) / std::max(1.0, std::fabs(fd));
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = name;
                result.worst_index = c;
            }
        }
    }
    return result;
}

} // namespace razh
