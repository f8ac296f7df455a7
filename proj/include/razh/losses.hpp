#pragma once

#include <vector>

#include "razh/dataset.hpp"
#include "razh/tape.hpp"
#include "razh/tensor.hpp"

namespace razh {

struct LossWeights {
    double alpha = 1.0;
    double beta = 0.01;
};

/// Pairwise weights balancing similar vs. dissimilar pairs in a batch.
/// theta_ij = N/s_p on similar pairs, N/s_n otherwise, with degenerate-batch
/// guards (all-similar or all-dissimilar batches zero out the missing slot).
struct PairWeights {
    Tensor2 theta; // n x n
    double s_p = 0.0;
    double s_n = 0.0;
};

PairWeights pair_weights(const SimilarityMatrix& s);

/// Weighted pairwise loss over relaxed codes H (n x K, rows are codes).
/// Double sum over all ordered pairs, including i=j.
double hash_loss(const Tensor2& h, const SimilarityMatrix& s, const PairWeights& w);

/// Tape version; `h` is n x K.
Var hash_loss_op(Tape& tape, Var h, const SimilarityMatrix& s, const PairWeights& w);

/// Summed cross-entropy; probabilities clamped at 1e-12 before the log.
double cls_loss(const Tensor2& y_onehot, const Tensor2& y_prob);

/// Tape version; `probs` is n x C, rows sum to 1.
Var cls_loss_op(Tape& tape, Var probs, const Tensor2& y_onehot);

/// Sum of squared errors: mixing-branch reconstruction over every patch,
/// reconstruction-branch term restricted to the selected columns. Set
/// `complement` to score the reconstruction branch on the unselected
/// columns instead.
double recon_loss(const Tensor2& g_z, const Tensor2& g_x, const Tensor2& raw,
                  const std::vector<std::size_t>& selected, bool complement = false);

Var recon_loss_op(Tape& tape, Var g_z, Var g_x, const Tensor2& raw,
                  const std::vector<std::size_t>& selected, bool complement = false);

/// Alignment between the two branches' relaxed codes, (1/2N) sum of
/// componentwise log-cosh. Rows are codes.
double hal_loss(const Tensor2& h_a, const Tensor2& h);

Var hal_loss_op(Tape& tape, Var h_a, Var h);

/// L = cls + alpha * hash + beta * (rec + hal).
double total_loss(double cls, double hash, double rec_plus_hal, const LossWeights& w);

/// Closed-form gradients used as a second oracle beside finite differences.
/// Exact derivatives of the losses above, so they must agree with the tape.
Tensor2 hash_loss_grad(const Tensor2& h, const SimilarityMatrix& s, const PairWeights& w);
Tensor2 cls_loss_grad(const Tensor2& y_onehot, const Tensor2& y_prob); // d/d y_prob
Tensor2 recon_loss_grad_gx(const Tensor2& g_x, const Tensor2& raw,
                           const std::vector<std::size_t>& selected,
                           bool complement = false);
Tensor2 hal_loss_grad_ha(const Tensor2& h_a, const Tensor2& h);

} // namespace razh
