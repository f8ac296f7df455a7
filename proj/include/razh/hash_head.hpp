#pragma once

#include <cstdint>
#include <vector>

#include "razh/tape.hpp"
#include "razh/tensor.hpp"

namespace razh {

/// K bits in {-1, +1}.
using HashCode = std::vector<std::int8_t>;

/// h = tanh(W_h^T f + o_h); every component in (-1, 1).
Tensor2 hash_forward(const Tensor2& feature, const Tensor2& w_h, const Tensor2& o_h);

/// Tape version for training. `feature` is d_v x 1.
Var hash_forward_op(Tape& tape, Var feature);

/// Sign per component; sgn(0) := +1.
HashCode binarize(const Tensor2& relaxed);

/// Softmax(W~^T h + o~) class probabilities.
Tensor2 classify(const Tensor2& relaxed, const Tensor2& w_cls, const Tensor2& o_cls);

/// Exact Hamming distance between two unpacked codes.
std::size_t hamming_unpacked(const HashCode& a, const HashCode& b);

} // namespace razh
