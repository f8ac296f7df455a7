#include "razh/patching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace razh {

Tensor2 extract_patches(const Tensor2& image, std::size_t patch_size) {
    if (patch_size == 0 || image.rows() % patch_size != 0 ||
        image.cols() % patch_size != 0)
        throw config_error("extract_patches: image size not divisible by patch size");
    const std::size_t gr = image.rows() / patch_size;
    const std::size_t gc = image.cols() / patch_size;
    Tensor2 raw(gr * gc, patch_size * patch_size);
    for (std::size_t r = 0; r < gr; ++r)
        for (std::size_t c = 0; c < gc; ++c) {
            const std::size_t patch = r * gc + c;
            for (std::size_t i = 0; i < patch_size; ++i)
                for (std::size_t j = 0; j < patch_size; ++j)
                    raw.at(patch, i * patch_size + j) =
                        image.at(r * patch_size + i, c * patch_size + j);
        }
    return raw;
}

Tensor2 reassemble_patches(const Tensor2& raw, std::size_t height,
                           std::size_t width, std::size_t patch_size) {
    if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0)
        throw config_error("reassemble_patches: size not divisible by patch size");
    const std::size_t gr = height / patch_size;
    const std::size_t gc = width / patch_size;
    if (raw.rows() != gr * gc || raw.cols() != patch_size * patch_size)
        throw config_error("reassemble_patches: patch matrix shape mismatch");
    Tensor2 image(height, width);
    for (std::size_t r = 0; r < gr; ++r)
        for (std::size_t c = 0; c < gc; ++c) {
            const std::size_t patch = r * gc + c;
            for (std::size_t i = 0; i < patch_size; ++i)
                for (std::size_t j = 0; j < patch_size; ++j)
                    image.at(r * patch_size + i, c * patch_size + j) =
                        raw.at(patch, i * patch_size + j);
        }
    return image;
}

Tensor2 project_patches(const Tensor2& raw, const Tensor2& w, const Tensor2& b) {
    if (w.cols() != raw.cols())
        throw config_error("project_patches: projection width != patch dimension");
    if (b.rows() != w.rows() || b.cols() != 1)
        throw config_error("project_patches: bias shape mismatch");
    Tensor2 embedded = matmul(w, transpose(raw));
    for (std::size_t i = 0; i < embedded.rows(); ++i)
        for (std::size_t j = 0; j < embedded.cols(); ++j)
            embedded.at(i, j) += b.at(i, 0);
    return embedded;
}

double col_dist_sq(const Tensor2& x, std::size_t a, const Tensor2& y, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double d = x.at(i, a) - y.at(i, b);
        s += d * d;
    }
    return s;
}

namespace {

// Assignment pass; returns inertia under the given centers.
double assign_points(const Tensor2& points, const Tensor2& centers,
                     std::vector<std::size_t>& assignment) {
    double inertia = 0.0;
    for (std::size_t j = 0; j < points.cols(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t c = 0; c < centers.cols(); ++c) {
            const double d = col_dist_sq(points, j, centers, c);
            if (d < best) { best = d; best_k = c; }
        }
        assignment[j] = best_k;
        inertia += best;
    }
    return inertia;
}

void repair_empty_clusters(const Tensor2& points, Tensor2& centers,
                           std::vector<std::size_t>& assignment, std::size_t k) {
    for (;;) {
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t c : assignment) ++counts[c];
        std::size_t empty = k;
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] == 0) { empty = c; break; }
        if (empty == k) return;

        const std::size_t donor = static_cast<std::size_t>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        double far_d = -1.0;
        std::size_t far_j = 0;
        for (std::size_t j = 0; j < points.cols(); ++j) {
            if (assignment[j] != donor) continue;
            const double d = col_dist_sq(points, j, centers, donor);
            if (d > far_d) { far_d = d; far_j = j; }
        }
        assignment[far_j] = empty;
        for (std::size_t i = 0; i < centers.rows(); ++i)
            centers.at(i, empty) = points.at(i, far_j);
    }
}

void update_centers(const Tensor2& points, Tensor2& centers,
                    const std::vector<std::size_t>& assignment, std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    centers.fill(0.0);
    for (std::size_t j = 0; j < points.cols(); ++j) {
        ++counts[assignment[j]];
        for (std::size_t i = 0; i < points.rows(); ++i)
            centers.at(i, assignment[j]) += points.at(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < centers.rows(); ++i)
            centers.at(i, c) /= static_cast<double>(counts[c]);
}

} // namespace

ClusterModel kmeans(const Tensor2& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter, double tol) {
    const std::size_t m = points.cols();
    if (k == 0 || k > m)
        throw config_error("kmeans: k must be in [1, point count]");
    if (max_iter < 1) throw config_error("kmeans: max_iter must be >= 1");

    std::mt19937_64 rng(seed);

    // k-means++ seeding.
    Tensor2 centers(points.rows(), k);
    std::vector<double> d2(m, std::numeric_limits<double>::infinity());
    {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        std::size_t first = pick(rng);
        for (std::size_t i = 0; i < points.rows(); ++i)
            centers.at(i, 0) = points.at(i, first);
    }
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            d2[j] = std::min(d2[j], col_dist_sq(points, j, centers, c - 1));
            total += d2[j];
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += d2[j];
                if (acc >= target) { chosen = j; break; }
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, m - 1);
            chosen = pick(rng);
        }
        for (std::size_t i = 0; i < points.rows(); ++i)
            centers.at(i, c) = points.at(i, chosen);
    }

    ClusterModel model;
    model.k = k;
    model.assignment.assign(m, 0);

    std::vector<std::size_t> prev_assignment;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        model.inertia = assign_points(points, centers, model.assignment);
        repair_empty_clusters(points, centers, model.assignment, k);
        model.inertia_history.push_back(model.inertia);
        ++model.iterations;

        // Fixed point: assignment stable, and centers are already the means
        // of this assignment from the previous update.
        if (iter > 0 && model.assignment == prev_assignment) break;
        prev_assignment = model.assignment;

        const Tensor2 prev = centers;
        update_centers(points, centers, model.assignment, k);

        double shift = 0.0;
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const double d = centers[i] - prev[i];
            shift += d * d;
        }
        if (std::sqrt(shift) < tol) break;
    }
    // Centers = means of the final assignment, exactly.
    update_centers(points, centers, model.assignment, k);
    model.inertia = 0.0;
    for (std::size_t j = 0; j < m; ++j)
        model.inertia += col_dist_sq(points, j, centers, model.assignment[j]);
    model.centers = std::move(centers);
    return model;
}

const Tensor2& cluster_means_as_parts(const ClusterModel& model) {
    return model.centers;
}

} // namespace razh
