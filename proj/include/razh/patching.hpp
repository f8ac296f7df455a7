#pragma once

#include <cstdint>
#include <vector>

#include "razh/tensor.hpp"

namespace razh {

/// Per-image patch data. Row j of `raw` and column j of `embedded` describe
/// the same patch; order is row-major over the patch grid.
struct PatchSequence {
    Tensor2 raw;      // M x (p*p*channels), reconstruction targets
    Tensor2 embedded; // d_v x M
    std::size_t m = 0;
};

struct ClusterModel {
    std::size_t k = 0;
    Tensor2 centers; // d_v x k
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
    std::vector<double> inertia_history; // one entry per Lloyd iteration
    std::size_t iterations = 0;
};

/// Row-major p x p tiles, flattened row-major. Values untouched.
Tensor2 extract_patches(const Tensor2& image, std::size_t patch_size);

/// Inverse of extract_patches.
Tensor2 reassemble_patches(const Tensor2& raw, std::size_t height,
                           std::size_t width, std::size_t patch_size);

/// Column j = W * raw_row_j + b.
Tensor2 project_patches(const Tensor2& raw, const Tensor2& w, const Tensor2& b);

/// Lloyd iterations from k-means++ seeding. Empty clusters are repaired by
/// stealing the farthest point from the largest cluster.
ClusterModel kmeans(const Tensor2& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 50, double tol = 1e-9);

/// Centers in stable cluster-index order.
const Tensor2& cluster_means_as_parts(const ClusterModel& model);

/// Squared Euclidean distance between column a of x and column b of y.
double col_dist_sq(const Tensor2& x, std::size_t a, const Tensor2& y, std::size_t b);

} // namespace razh
