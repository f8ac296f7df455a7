#include "razh/losses.hpp"

#include <cmath>

namespace razh {

namespace {

Tensor2 sim_tensor(const SimilarityMatrix& s) {
    Tensor2 out(s.n, s.n);
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j)
            out.at(i, j) = s.at(i, j) ? 1.0 : 0.0;
    return out;
}

double stable_softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

} // namespace

PairWeights pair_weights(const SimilarityMatrix& s) {
    if (s.n == 0) throw config_error("pair_weights: empty similarity matrix");
    const double n = static_cast<double>(s.n);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j) sum += s.at(i, j) ? 1.0 : 0.0;

    PairWeights w;
    w.s_p = 0.5 * sum;
    w.s_n = n - w.s_p;
    const double w_sim = w.s_p > 0.0 ? n / w.s_p : 0.0;
    const double w_dis = w.s_n > 0.0 ? n / w.s_n : 0.0;
    w.theta = Tensor2(s.n, s.n);
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j)
            w.theta.at(i, j) = s.at(i, j) ? w_sim : w_dis;
    return w;
}

double hash_loss(const Tensor2& h, const SimilarityMatrix& s, const PairWeights& w) {
    if (h.rows() != s.n || w.theta.rows() != s.n)
        throw config_error("hash_loss: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < s.n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < h.cols(); ++k) dot += h.at(i, k) * h.at(j, k);
            const double delta = 0.5 * dot;
            const double sij = s.at(i, j) ? 1.0 : 0.0;
            total += w.theta.at(i, j) * (stable_softplus(delta) - sij * delta);
        }
    }
    return total;
}

Var hash_loss_op(Tape& tape, Var h, const SimilarityMatrix& s, const PairWeights& w) {
    if (tape.value(h).rows() != s.n)
        throw config_error("hash_loss_op: size mismatch");
    Var delta = tape.scale(tape.matmul_op(h, tape.transpose_op(h)), 0.5);
    Var sim = tape.constant(sim_tensor(s));
    Var theta = tape.constant(w.theta);
    Var per_pair = tape.sub(tape.softplus(delta), tape.hadamard(sim, delta));
    return tape.sum_all(tape.hadamard(theta, per_pair));
}

double cls_loss(const Tensor2& y_onehot, const Tensor2& y_prob) {
    if (y_onehot.rows() != y_prob.rows() || y_onehot.cols() != y_prob.cols())
        throw config_error("cls_loss: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < y_prob.size(); ++i)
        total -= y_onehot[i] * std::log(std::max(y_prob[i], 1e-12));
    return total;
}

Var cls_loss_op(Tape& tape, Var probs, const Tensor2& y_onehot) {
    Var y = tape.constant(y_onehot);
    return tape.scale(tape.sum_all(tape.hadamard(y, tape.log_clamped(probs))), -1.0);
}

double recon_loss(const Tensor2& g_z, const Tensor2& g_x, const Tensor2& raw,
                  const std::vector<std::size_t>& selected, bool complement) {
    if (g_z.rows() != raw.rows() || g_z.cols() != raw.cols())
        throw config_error("recon_loss: mixing-branch shape mismatch");
    if (g_x.rows() != raw.rows() || g_x.cols() != raw.cols())
        throw config_error("recon_loss: reconstruction-branch shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < g_z.size(); ++i) {
        const double d = g_z[i] - raw[i];
        total += d * d;
    }
    std::vector<bool> in_set(raw.cols(), complement);
    for (std::size_t c : selected) {
        if (c >= raw.cols()) throw config_error("recon_loss: selected index out of range");
        in_set[c] = !complement;
    }
    for (std::size_t c = 0; c < raw.cols(); ++c) {
        if (!in_set[c]) continue;
        for (std::size_t r = 0; r < raw.rows(); ++r) {
            const double d = g_x.at(r, c) - raw.at(r, c);
            total += d * d;
        }
    }
    return total;
}

namespace {

std::vector<std::size_t> scored_columns(std::size_t cols,
                                        const std::vector<std::size_t>& selected,
                                        bool complement) {
    if (!complement) return selected;
    std::vector<bool> in_set(cols, false);
    for (std::size_t c : selected) in_set[c] = true;
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < cols; ++c)
        if (!in_set[c]) out.push_back(c);
    return out;
}

} // namespace

Var recon_loss_op(Tape& tape, Var g_z, Var g_x, const Tensor2& raw,
                  const std::vector<std::size_t>& selected, bool complement) {
    Var target = tape.constant(raw);
    Var dz = tape.sub(g_z, target);
    Var loss = tape.sum_all(tape.hadamard(dz, dz));
    const auto cols = scored_columns(raw.cols(), selected, complement);
    if (!cols.empty()) {
        Var dx = tape.sub(tape.gather_cols(g_x, cols), tape.gather_cols(target, cols));
        loss = tape.add(loss, tape.sum_all(tape.hadamard(dx, dx)));
    }
    return loss;
}

double hal_loss(const Tensor2& h_a, const Tensor2& h) {
    if (h_a.rows() != h.rows() || h_a.cols() != h.cols())
        throw config_error("hal_loss: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        total += logcosh_scalar(h_a[i] - h[i]);
    return total / (2.0 * static_cast<double>(h.rows()));
}

Var hal_loss_op(Tape& tape, Var h_a, Var h) {
    const double n = static_cast<double>(tape.value(h).rows());
    return tape.scale(tape.sum_all(tape.logcosh_op(tape.sub(h_a, h))), 1.0 / (2.0 * n));
}

double total_loss(double cls, double hash, double rec_plus_hal, const LossWeights& w) {
    return cls + w.alpha * hash + w.beta * rec_plus_hal;
}

Tensor2 hash_loss_grad(const Tensor2& h, const SimilarityMatrix& s, const PairWeights& w) {
    // Exact gradient of the symmetric double sum: both orientations of each
    // pair contribute, collapsing to sum_j theta_ij (sigma(delta_ij) - s_ij) h_j.
    Tensor2 grad(h.rows(), h.cols());
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < s.n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < h.cols(); ++k) dot += h.at(i, k) * h.at(j, k);
            const double delta = 0.5 * dot;
            const double sig = 1.0 / (1.0 + std::exp(-delta));
            const double sij = s.at(i, j) ? 1.0 : 0.0;
            const double c = w.theta.at(i, j) * (sig - sij);
            for (std::size_t k = 0; k < h.cols(); ++k)
                grad.at(i, k) += c * h.at(j, k);
        }
    }
    return grad;
}

Tensor2 cls_loss_grad(const Tensor2& y_onehot, const Tensor2& y_prob) {
    Tensor2 grad(y_prob.rows(), y_prob.cols());
    for (std::size_t i = 0; i < y_prob.size(); ++i)
        grad[i] = y_prob[i] > 1e-12 ? -y_onehot[i] / y_prob[i] : 0.0;
    return grad;
}

Tensor2 recon_loss_grad_gx(const Tensor2& g_x, const Tensor2& raw,
                           const std::vector<std::size_t>& selected, bool complement) {
    Tensor2 grad(g_x.rows(), g_x.cols());
    for (std::size_t c : scored_columns(raw.cols(), selected, complement))
        for (std::size_t r = 0; r < raw.rows(); ++r)
            grad.at(r, c) = 2.0 * (g_x.at(r, c) - raw.at(r, c));
    return grad;
}

Tensor2 hal_loss_grad_ha(const Tensor2& h_a, const Tensor2& h) {
    const double scale = 1.0 / (2.0 * static_cast<double>(h.rows()));
    Tensor2 grad(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.size(); ++i)
        grad[i] = scale * std::tanh(h_a[i] - h[i]);
    return grad;
}

} // namespace razh
