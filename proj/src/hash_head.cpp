#include "razh/hash_head.hpp"

namespace razh {

Tensor2 hash_forward(const Tensor2& feature, const Tensor2& w_h, const Tensor2& o_h) {
    if (feature.cols() != 1 || feature.rows() != w_h.rows())
        throw config_error("hash_forward: feature shape mismatch");
    if (o_h.rows() != w_h.cols() || o_h.cols() != 1)
        throw config_error("hash_forward: bias shape mismatch");
    Tensor2 pre = matmul(transpose(w_h), feature);
    for (std::size_t i = 0; i < pre.rows(); ++i) pre.at(i, 0) += o_h.at(i, 0);
    return tanh_fwd(pre);
}

Var hash_forward_op(Tape& tape, Var feature) {
    Var pre = tape.matmul_op(tape.transpose_op(tape.param("hash_w")), feature);
    return tape.tanh_op(tape.add(pre, tape.param("hash_b")));
}

HashCode binarize(const Tensor2& relaxed) {
    HashCode code;
    code.reserve(relaxed.size());
    for (std::size_t i = 0; i < relaxed.size(); ++i)
        code.push_back(relaxed[i] < 0.0 ? -1 : 1);
    return code;
}

Tensor2 classify(const Tensor2& relaxed, const Tensor2& w_cls, const Tensor2& o_cls) {
    if (relaxed.cols() != 1 || relaxed.rows() != w_cls.rows())
        throw config_error("classify: code shape mismatch");
    if (o_cls.rows() != w_cls.cols() || o_cls.cols() != 1)
        throw config_error("classify: bias shape mismatch");
    Tensor2 logits = matmul(transpose(w_cls), relaxed);
    for (std::size_t i = 0; i < logits.rows(); ++i) logits.at(i, 0) += o_cls.at(i, 0);
    return softmax_rows(transpose(logits)); // 1 x C probability row
}

std::size_t hamming_unpacked(const HashCode& a, const HashCode& b) {
    if (a.size() != b.size())
        throw config_error("hamming_unpacked: code length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
    return d;
}

} // namespace razh
