#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "razh/hash_head.hpp"
#include "razh/tensor.hpp"

namespace razh {

/// Packed binary codes with labels. Bit j of a code lives at byte j/8,
/// bit position j%8; +1 packs to 1, -1 to 0. Immutable after build.
struct HashCodeDB {
    std::size_t k_bits = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> packed; // n * bytes_per_row()
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> ids; // original sample ids

    std::size_t bytes_per_row() const { return (k_bits + 7) / 8; }
    const std::uint8_t* row(std::size_t i) const { return packed.data() + i * bytes_per_row(); }
};

std::vector<std::uint8_t> pack_code(const HashCode& code);
HashCode unpack_code(const std::uint8_t* bytes, std::size_t k_bits);

HashCodeDB build_db(const std::vector<HashCode>& codes,
                    const std::vector<std::uint32_t>& labels,
                    const std::vector<std::uint32_t>& ids);

/// XOR + popcount over the packed representation.
std::size_t hamming_packed(const std::uint8_t* a, const std::uint8_t* b,
                           std::size_t n_bytes);
std::size_t hamming(const HashCodeDB& db, std::size_t i, std::size_t j);

struct RankedResult {
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> distances;  // non-decreasing
    std::vector<bool> relevant;          // shares the query's class
    double ap = 0.0;                     // untruncated average precision
};

/// Full ordering by (distance, id). Optionally drop one db id (self-query).
RankedResult rank(const HashCode& query, std::uint32_t query_label,
                  const HashCodeDB& db,
                  std::optional<std::uint32_t> exclude_id = std::nullopt);

/// AP over relevance flags already in rank order; 0 when nothing relevant
/// falls within the cutoff.
double average_precision(const std::vector<bool>& relevant, std::size_t cutoff);

double map_at_k(const HashCodeDB& queries, const HashCodeDB& db,
                std::size_t cutoff = 5000, bool self_exclude = false);

struct CurvePoint {
    double x = 0.0; // recall (pr_curve) or N (p_at_n / r_at_n)
    double y = 0.0;
};

/// Micro-averaged precision/recall at Hamming radii 0..K; radii where no
/// query retrieves anything are skipped.
std::vector<CurvePoint> pr_curve(const HashCodeDB& queries, const HashCodeDB& db,
                                 bool self_exclude = false);
std::vector<CurvePoint> p_at_n(const HashCodeDB& queries, const HashCodeDB& db,
                               const std::vector<std::size_t>& grid,
                               bool self_exclude = false);
std::vector<CurvePoint> r_at_n(const HashCodeDB& queries, const HashCodeDB& db,
                               const std::vector<std::size_t>& grid,
                               bool self_exclude = false);

struct ConfusionResult {
    std::vector<std::uint32_t> classes; // classes with >=1 code, ascending
    Tensor2 matrix;                     // mean pairwise Hamming distances
};

/// Entry (a,b): mean distance over cross pairs; diagonal over within-class
/// pairs (0 for singleton classes). Classes absent from the db are dropped
/// with a warning on stderr.
ConfusionResult class_confusion(const HashCodeDB& db, std::size_t n_classes);

void save_codes(const std::string& path, const HashCodeDB& db);
HashCodeDB load_codes(const std::string& path);

} // namespace razh
