#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "razh/tape.hpp"

namespace razh {

/// Shapes and knobs for the whole model. Desk-scale defaults.
struct ModelConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 8;
    std::size_t d_v = 32; // patch embedding dimension
    std::size_t d_a = 16; // attribute embedding dimension
    std::size_t word_dim = 16;
    std::size_t code_length = 16; // K
    std::size_t n_classes = 0;    // C
    std::size_t k_clusters = 4;   // K'
    double threshold = 0.5;       // cosine gate for replacement
    double selection_ratio = 0.5;
    bool encoder_tanh = true; // identity activation is for tests only

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t patch_count() const { return grid() * grid(); } // M
    std::size_t patch_dim() const { return patch_size * patch_size; }
};

/// Registers every trainable array under its fixed name. Gaussian fan-based
/// init for weights, zeros for biases, small positional/mask vectors.
void init_model_params(ParamStore& store, const ModelConfig& cfg, std::uint64_t seed);

/// Two per-patch affine+activation blocks around one global mixing layer
/// (mean-pooled context mapped back onto every column). Positional vectors
/// are added for the given grid positions. Sequence-in, sequence-out.
Var encode(Tape& tape, const ModelConfig& cfg, Var seq,
           const std::vector<std::size_t>& positions);

/// Mirror stack mapping d_v x M features to raw-patch space (patch_dim x M).
Var decode(Tape& tape, const ModelConfig& cfg, Var features);

/// Uniform sample of max(1, round(ratio*m)) patch indices, without
/// replacement, returned sorted.
std::vector<std::size_t> select_patches(std::size_t m, double ratio,
                                        std::mt19937_64& rng);

/// Encoded columns back at their grid positions, mask token elsewhere.
Var pad_with_mask(Tape& tape, Var encoded, const std::vector<std::size_t>& selected,
                  std::size_t total_cols);

/// Sample feature: mean over patch features.
Var pool(Tape& tape, Var features);

} // namespace razh
