#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "razh/dataset.hpp"
#include "razh/losses.hpp"
#include "razh/retrieval.hpp"
#include "razh/visual_embedding.hpp"

namespace razh {

struct TrainConfig {
    ModelConfig model;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::uint64_t seed = 1;
    double alpha = 1.0;
    double beta = 0.01;
};

/// Per-epoch means of every loss component.
struct LossHistory {
    std::vector<double> total, cls, hash, rec, hal;
};

struct Checkpoint {
    TrainConfig config;
    std::size_t epoch = 0;
    std::string rng_state;
    ParamStore params;
};

struct TrainResult {
    Checkpoint checkpoint;
    LossHistory history;
};

/// One batch through both branches on the caller's tape. `seed` drives the
/// per-image k-means restarts and the patch selection; same seed, same graph.
struct BatchForward {
    Var h;     // n x K, reconstruction-branch codes
    Var ha;    // n x K, mixing-branch codes
    Var probs; // n x C classifier rows
    Var rec;   // 1 x 1, reconstruction error summed over the batch
};
BatchForward forward_batch(Tape& tape, const Dataset& ds,
                           const std::vector<std::size_t>& ids,
                           const WordVectorTable& words, const ModelConfig& cfg,
                           std::uint64_t seed);

/// Bias-corrected moment update over every named array, then gradient reset.
/// Call once per backward pass.
void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps);

/// Full training loop: per image patches -> k-means -> attribute match ->
/// mix -> both branches -> total loss -> backprop -> Adam. Only train ids
/// (seen classes) touch parameters.
TrainResult train(const Dataset& ds, const ZeroShotSplit& split,
                  const WordVectorTable& words, const TrainConfig& cfg);

/// Relaxed code (K x 1) of one image: full-sequence encoder, mean pool,
/// hash layer. No mixing, no masking.
Tensor2 relaxed_code(const Dataset& ds, std::size_t id, ParamStore& store,
                     const ModelConfig& cfg);

std::vector<HashCode> encode_codes(const Dataset& ds,
                                   const std::vector<std::size_t>& ids,
                                   ParamStore& store, const ModelConfig& cfg);

HashCodeDB encode_db(const Dataset& ds, const std::vector<std::size_t>& ids,
                     ParamStore& store, const ModelConfig& cfg);

struct GridCell {
    double alpha = 0.0;
    double beta = 0.0;
    double map = 0.0;
};

struct GridSearchResult {
    double best_alpha = 0.0;
    double best_beta = 0.0;
    std::vector<GridCell> table; // alpha-major, beta-minor
};

/// One short run per (alpha, beta) cell; scored by mAP of test queries
/// against the retrieval set. Ties break to smaller alpha, then beta.
GridSearchResult grid_search(const Dataset& ds, const ZeroShotSplit& split,
                             const WordVectorTable& words,
                             const std::vector<double>& alpha_grid,
                             const std::vector<double>& beta_grid,
                             const TrainConfig& base);

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

} // namespace razh
