#include "razh/attribute_embedding.hpp"

#include <cmath>

namespace razh {

Tensor2 word_matrix(const std::vector<std::string>& attribute_names,
                    const std::vector<std::size_t>& ids,
                    const WordVectorTable& words) {
    if (words.dim == 0) throw data_error("word_matrix: empty word-vector table");
    Tensor2 out(words.dim, ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] >= attribute_names.size())
            throw data_error("word_matrix: attribute id out of range");
        const Tensor2& v = words.get(attribute_names[ids[j]]);
        for (std::size_t i = 0; i < words.dim; ++i) out.at(i, j) = v.at(i, 0);
    }
    return out;
}

Tensor2 affine_cols(const Tensor2& input, const Tensor2& w, const Tensor2& b) {
    if (w.cols() != input.rows())
        throw config_error("affine_cols: weight width != input rows");
    if (b.rows() != w.rows() || b.cols() != 1)
        throw config_error("affine_cols: bias shape mismatch");
    Tensor2 out = matmul(w, input);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out.at(i, j) += b.at(i, 0);
    return out;
}

AttributeEmbeddings embed_attributes(const AttributeSplit& split,
                                     const std::vector<std::string>& attribute_names,
                                     const WordVectorTable& words,
                                     const Tensor2& fa_w, const Tensor2& fa_b) {
    AttributeEmbeddings out;
    out.present_ids = split.present;
    out.absent_ids = split.absent;
    out.present = affine_cols(word_matrix(attribute_names, split.present, words),
                              fa_w, fa_b);
    out.absent = split.absent.empty()
                     ? Tensor2(fa_w.rows(), 0)
                     : affine_cols(word_matrix(attribute_names, split.absent, words),
                                   fa_w, fa_b);
    return out;
}

Tensor2 map_parts(const Tensor2& parts, const Tensor2& fm_w, const Tensor2& fm_b) {
    return affine_cols(parts, fm_w, fm_b);
}

double cosine(const Tensor2& a, std::size_t col_a, const Tensor2& b, std::size_t col_b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double x = a.at(i, col_a);
        const double y = b.at(i, col_b);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0)
        throw numeric_error("cosine: zero-norm column");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

MatchResult top_sim(const AttributeEmbeddings& embeddings,
                    const Tensor2& parts_mapped) {
    if (embeddings.present.cols() == 0)
        throw data_error("top_sim: no present attributes to match");
    if (embeddings.present.rows() != parts_mapped.rows())
        throw config_error("top_sim: dimension mismatch");

    MatchResult out;
    for (std::size_t j = 0; j < parts_mapped.cols(); ++j) {
        std::size_t best_col = 0;
        double best_sim = -2.0;
        for (std::size_t c = 0; c < embeddings.present.cols(); ++c) {
            const double s = cosine(parts_mapped, j, embeddings.present, c);
            const bool better =
                s > best_sim ||
                (s == best_sim &&
                 embeddings.present_ids[c] < embeddings.present_ids[best_col]);
            if (best_sim == -2.0 || better) {
                best_sim = s;
                best_col = c;
            }
        }
        out.attr_id.push_back(embeddings.present_ids[best_col]);
        out.sim.push_back(best_sim);
        out.present_col.push_back(best_col);
    }
    return out;
}

Tensor2 lift(const Tensor2& selected, const Tensor2& fi_w, const Tensor2& fi_b) {
    return affine_cols(selected, fi_w, fi_b);
}

MixedSequence mix(const Tensor2& patches, const ClusterModel& cluster,
                  const MatchResult& matches, const Tensor2& lifted,
                  double threshold) {
    if (matches.sim.size() != cluster.k)
        throw config_error("mix: matches do not cover all clusters");
    if (lifted.cols() != cluster.k || lifted.rows() != patches.rows())
        throw config_error("mix: lifted column shape mismatch");
    if (cluster.assignment.size() != patches.cols())
        throw config_error("mix: assignment length != patch count");

    MixedSequence out;
    out.z = patches;
    out.replaced.assign(patches.cols(), false);
    out.replaced_cluster.assign(cluster.k, false);
    for (std::size_t c = 0; c < cluster.k; ++c)
        out.replaced_cluster[c] = matches.sim[c] >= threshold;
    for (std::size_t j = 0; j < patches.cols(); ++j) {
        const std::size_t c = cluster.assignment[j];
        if (!out.replaced_cluster[c]) continue;
        out.replaced[j] = true;
        for (std::size_t i = 0; i < patches.rows(); ++i)
            out.z.at(i, j) = lifted.at(i, c);
    }
    return out;
}

} // namespace razh
