#pragma once

#include <vector>

#include "razh/dataset.hpp"
#include "razh/patching.hpp"
#include "razh/tensor.hpp"

namespace razh {

/// Present/absent attribute embedding columns with their attribute ids.
struct AttributeEmbeddings {
    Tensor2 present; // d_a x E^(i)
    Tensor2 absent;  // d_a x E^(i-)
    std::vector<std::size_t> present_ids;
    std::vector<std::size_t> absent_ids;
};

/// Per-cluster best present attribute by cosine similarity.
struct MatchResult {
    std::vector<std::size_t> attr_id; // chosen attribute, one per cluster
    std::vector<double> sim;          // cosine in [-1, 1]
    std::vector<std::size_t> present_col; // column of the chosen id in `present`
};

struct MixedSequence {
    Tensor2 z; // d_v x M
    std::vector<bool> replaced;         // per patch
    std::vector<bool> replaced_cluster; // per cluster
};

/// Stack the word vectors of the given attribute ids as columns (d_w x E).
Tensor2 word_matrix(const std::vector<std::string>& attribute_names,
                    const std::vector<std::size_t>& ids,
                    const WordVectorTable& words);

/// Column-wise affine map: out_j = w * in_j + b. Shared by F_a, F_m, F_i.
Tensor2 affine_cols(const Tensor2& input, const Tensor2& w, const Tensor2& b);

AttributeEmbeddings embed_attributes(const AttributeSplit& split,
                                     const std::vector<std::string>& attribute_names,
                                     const WordVectorTable& words,
                                     const Tensor2& fa_w, const Tensor2& fa_b);

/// L = F_m(J).
Tensor2 map_parts(const Tensor2& parts, const Tensor2& fm_w, const Tensor2& fm_b);

/// Per L column, argmax cosine over present columns; ties break to the
/// lowest attribute id.
MatchResult top_sim(const AttributeEmbeddings& embeddings, const Tensor2& parts_mapped);

/// P_a = F_i(A^(s)).
Tensor2 lift(const Tensor2& selected, const Tensor2& fi_w, const Tensor2& fi_b);

/// Threshold-gated replacement: every patch of a cluster whose match clears
/// the threshold takes that cluster's lifted column.
MixedSequence mix(const Tensor2& patches, const ClusterModel& cluster,
                  const MatchResult& matches, const Tensor2& lifted,
                  double threshold);

double cosine(const Tensor2& a, std::size_t col_a, const Tensor2& b, std::size_t col_b);

} // namespace razh
