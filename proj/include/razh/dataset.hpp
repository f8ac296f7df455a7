#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "razh/tensor.hpp"

namespace razh {

/// Images with single-label classes and per-class binary attribute sets.
/// Immutable after construction; safe for concurrent reads.
struct Dataset {
    std::vector<Tensor2> images; // H x W grayscale in [0,1]
    std::vector<std::size_t> labels;
    std::vector<std::string> class_names;
    std::vector<std::string> attribute_names;
    std::vector<std::vector<std::uint8_t>> class_attributes; // C x N'
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t n_classes() const { return class_names.size(); }
    std::size_t n_samples() const { return images.size(); }
    std::size_t n_attributes() const { return attribute_names.size(); }

    void validate() const;
};

struct ZeroShotSplit {
    std::vector<std::size_t> seen;   // class ids V
    std::vector<std::size_t> unseen; // class ids U
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
    std::vector<std::size_t> retrieval_ids;
};

struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<std::uint8_t> bits; // row-major n x n

    std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * n + j]; }
};

struct AttributeSplit {
    std::vector<std::size_t> present; // T^(i)
    std::vector<std::size_t> absent;  // T^(i-)
};

struct WordVectorTable {
    std::size_t dim = 0;
    std::map<std::string, Tensor2> vectors; // name -> dim x 1

    const Tensor2& get(const std::string& name) const;
};

/// Attribute-driven synthetic images: each attribute owns a texture motif
/// and a fixed set of patch positions; a class renders the motifs of its
/// attributes at those positions plus pixel noise.
Dataset synth_generate(std::size_t n_classes, std::size_t n_attrs,
                       std::size_t samples_per_class, std::size_t image_size,
                       std::size_t patch_size, std::uint64_t seed);

/// Which attribute owns patch position `pos` in the generator's layout.
std::size_t synth_patch_owner(std::size_t pos, std::size_t n_attrs);

ZeroShotSplit make_split(const Dataset& ds, std::size_t n_unseen, std::uint64_t seed);

SimilarityMatrix build_similarity(const std::vector<std::size_t>& labels);

AttributeSplit attribute_split(const Dataset& ds, std::size_t class_id);

WordVectorTable load_word_vectors(const std::string& path);
WordVectorTable synth_word_vectors(const std::vector<std::string>& names,
                                   std::size_t dim, std::uint64_t seed);

// Container file: magic RZDS + version, counts, class-attribute mask,
// labels, image payload as real-32 little-endian.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

void save_split(const ZeroShotSplit& split, const std::string& path);
ZeroShotSplit load_split(const std::string& path);

} // namespace razh
