#include "razh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

#include "razh/errors.hpp"

namespace razh {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw data_error("unexpected end of file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

std::vector<std::uint8_t> pack_code(const HashCode& code) {
    std::vector<std::uint8_t> out((code.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < code.size(); ++j) {
        if (code[j] != 1 && code[j] != -1)
            throw config_error("pack_code: bits must be +1 or -1");
        if (code[j] == 1) out[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
    return out;
}

HashCode unpack_code(const std::uint8_t* bytes, std::size_t k_bits) {
    HashCode out(k_bits);
    for (std::size_t j = 0; j < k_bits; ++j)
        out[j] = (bytes[j / 8] >> (j % 8)) & 1u ? 1 : -1;
    return out;
}

HashCodeDB build_db(const std::vector<HashCode>& codes,
                    const std::vector<std::uint32_t>& labels,
                    const std::vector<std::uint32_t>& ids) {
    if (codes.size() != labels.size() || codes.size() != ids.size())
        throw config_error("build_db: codes/labels/ids size mismatch");
    HashCodeDB db;
    db.n = codes.size();
    db.k_bits = codes.empty() ? 0 : codes[0].size();
    db.labels = labels;
    db.ids = ids;
    db.packed.reserve(db.n * db.bytes_per_row());
    for (const auto& code : codes) {
        if (code.size() != db.k_bits)
            throw config_error("build_db: inconsistent code length");
        const auto row = pack_code(code);
        db.packed.insert(db.packed.end(), row.begin(), row.end());
    }
    return db;
}

std::size_t hamming_packed(const std::uint8_t* a, const std::uint8_t* b,
                           std::size_t n_bytes) {
    std::size_t d = 0;
    std::size_t i = 0;
    for (; i + 8 <= n_bytes; i += 8) {
        std::uint64_t wa, wb;
        std::memcpy(&wa, a + i, 8);
        std::memcpy(&wb, b + i, 8);
        d += static_cast<std::size_t>(std::popcount(wa ^ wb));
    }
    for (; i < n_bytes; ++i)
        d += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    return d;
}

std::size_t hamming(const HashCodeDB& db, std::size_t i, std::size_t j) {
    if (i >= db.n || j >= db.n) throw config_error("hamming: row out of range");
    return hamming_packed(db.row(i), db.row(j), db.bytes_per_row());
}

RankedResult rank(const HashCode& query, std::uint32_t query_label,
                  const HashCodeDB& db, std::optional<std::uint32_t> exclude_id) {
    if (db.n == 0) throw data_error("rank: empty code database");
    if (query.size() != db.k_bits) throw config_error("rank: code length mismatch");
    const auto q = pack_code(query);

    std::vector<std::pair<std::size_t, std::uint32_t>> order; // (distance, id)
    std::vector<std::size_t> rows;
    order.reserve(db.n);
    rows.reserve(db.n);
    for (std::size_t i = 0; i < db.n; ++i) {
        if (exclude_id && db.ids[i] == *exclude_id) continue;
        order.emplace_back(hamming_packed(q.data(), db.row(i), db.bytes_per_row()),
                           db.ids[i]);
        rows.push_back(i);
    }
    std::vector<std::size_t> perm(order.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return order[a] < order[b];
    });

    RankedResult out;
    out.ids.reserve(perm.size());
    out.distances.reserve(perm.size());
    out.relevant.reserve(perm.size());
    for (std::size_t p : perm) {
        out.ids.push_back(order[p].second);
        out.distances.push_back(order[p].first);
        out.relevant.push_back(db.labels[rows[p]] == query_label);
    }
    out.ap = average_precision(out.relevant, out.relevant.size());
    return out;
}

double average_precision(const std::vector<bool>& relevant, std::size_t cutoff) {
    const std::size_t limit = std::min(cutoff, relevant.size());
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t p = 0; p < limit; ++p) {
        if (!relevant[p]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double map_at_k(const HashCodeDB& queries, const HashCodeDB& db,
                std::size_t cutoff, bool self_exclude) {
    if (db.n == 0) throw data_error("map_at_k: empty code database");
    if (queries.n == 0) throw data_error("map_at_k: no queries");
    double total = 0.0;
    for (std::size_t i = 0; i < queries.n; ++i) {
        const auto code = unpack_code(queries.row(i), queries.k_bits);
        const auto ranked =
            rank(code, queries.labels[i], db,
                 self_exclude ? std::optional<std::uint32_t>(queries.ids[i])
                              : std::nullopt);
        total += average_precision(ranked.relevant, cutoff);
    }
    return total / static_cast<double>(queries.n);
}

std::vector<CurvePoint> pr_curve(const HashCodeDB& queries, const HashCodeDB& db,
                                 bool self_exclude) {
    // Counts of (retrieved, relevant retrieved) per radius, pooled over queries.
    std::vector<std::size_t> retrieved(db.k_bits + 1, 0), rel(db.k_bits + 1, 0);
    std::size_t total_relevant = 0;
    for (std::size_t i = 0; i < queries.n; ++i) {
        const auto code = unpack_code(queries.row(i), queries.k_bits);
        const auto ranked =
            rank(code, queries.labels[i], db,
                 self_exclude ? std::optional<std::uint32_t>(queries.ids[i])
                              : std::nullopt);
        for (std::size_t p = 0; p < ranked.ids.size(); ++p) {
            ++retrieved[ranked.distances[p]];
            if (ranked.relevant[p]) {
                ++rel[ranked.distances[p]];
                ++total_relevant;
            }
        }
    }
    std::vector<CurvePoint> out;
    std::size_t ret_cum = 0, rel_cum = 0;
    for (std::size_t r = 0; r <= db.k_bits; ++r) {
        ret_cum += retrieved[r];
        rel_cum += rel[r];
        if (ret_cum == 0) continue;
        CurvePoint pt;
        pt.x = total_relevant == 0
                   ? 0.0
                   : static_cast<double>(rel_cum) / static_cast<double>(total_relevant);
        pt.y = static_cast<double>(rel_cum) / static_cast<double>(ret_cum);
        out.push_back(pt);
    }
    return out;
}

namespace {

std::vector<CurvePoint> at_n_curve(const HashCodeDB& queries, const HashCodeDB& db,
                                   const std::vector<std::size_t>& grid,
                                   bool self_exclude, bool precision) {
    std::vector<CurvePoint> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out[g].x = static_cast<double>(grid[g]);
    for (std::size_t i = 0; i < queries.n; ++i) {
        const auto code = unpack_code(queries.row(i), queries.k_bits);
        const auto ranked =
            rank(code, queries.labels[i], db,
                 self_exclude ? std::optional<std::uint32_t>(queries.ids[i])
                              : std::nullopt);
        const std::size_t total_rel = static_cast<std::size_t>(
            std::count(ranked.relevant.begin(), ranked.relevant.end(), true));
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const std::size_t n = std::min(grid[g], ranked.ids.size());
            if (n == 0) continue;
            const std::size_t hits = static_cast<std::size_t>(std::count(
                ranked.relevant.begin(),
                ranked.relevant.begin() + static_cast<std::ptrdiff_t>(n), true));
            if (precision)
                out[g].y += static_cast<double>(hits) / static_cast<double>(n);
            else if (total_rel > 0)
                out[g].y += static_cast<double>(hits) / static_cast<double>(total_rel);
        }
    }
    for (auto& pt : out) pt.y /= static_cast<double>(queries.n);
    return out;
}

} // namespace

std::vector<CurvePoint> p_at_n(const HashCodeDB& queries, const HashCodeDB& db,
                               const std::vector<std::size_t>& grid,
                               bool self_exclude) {
    return at_n_curve(queries, db, grid, self_exclude, true);
}

std::vector<CurvePoint> r_at_n(const HashCodeDB& queries, const HashCodeDB& db,
                               const std::vector<std::size_t>& grid,
                               bool self_exclude) {
    return at_n_curve(queries, db, grid, self_exclude, false);
}

ConfusionResult class_confusion(const HashCodeDB& db, std::size_t n_classes) {
    std::vector<std::vector<std::size_t>> members(n_classes);
    for (std::size_t i = 0; i < db.n; ++i) {
        if (db.labels[i] >= n_classes)
            throw data_error("class_confusion: label out of range");
        members[db.labels[i]].push_back(i);
    }
    ConfusionResult out;
    for (std::uint32_t c = 0; c < n_classes; ++c) {
        if (members[c].empty())
            std::cerr << "class_confusion: class " << c << " has no codes, excluded\n";
        else
            out.classes.push_back(c);
    }
    const std::size_t cc = out.classes.size();
    out.matrix = Tensor2(cc, cc);
    for (std::size_t a = 0; a < cc; ++a) {
        const auto& ma = members[out.classes[a]];
        for (std::size_t b = a; b < cc; ++b) {
            const auto& mb = members[out.classes[b]];
            double sum = 0.0;
            std::size_t pairs = 0;
            if (a == b) {
                for (std::size_t i = 0; i < ma.size(); ++i)
                    for (std::size_t j = i + 1; j < ma.size(); ++j) {
                        sum += static_cast<double>(hamming(db, ma[i], ma[j]));
                        ++pairs;
                    }
            } else {
                for (std::size_t i : ma)
                    for (std::size_t j : mb) {
                        sum += static_cast<double>(hamming(db, i, j));
                        ++pairs;
                    }
            }
            const double mean = pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
            out.matrix.at(a, b) = mean;
            out.matrix.at(b, a) = mean;
        }
    }
    return out;
}

void save_codes(const std::string& path, const HashCodeDB& db) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot write code file: " + path);
    os.write("RZDB", 4);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(db.k_bits));
    write_u32(os, static_cast<std::uint32_t>(db.n));
    for (std::uint32_t label : db.labels) write_u32(os, label);
    os.write(reinterpret_cast<const char*>(db.packed.data()),
             static_cast<std::streamsize>(db.packed.size()));
    if (!os) throw data_error("write failed: " + path);
}

HashCodeDB load_codes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open code file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "RZDB", 4) != 0)
        throw data_error("bad code file magic: " + path);
    if (read_u32(is) != 1) throw data_error("unsupported code file version: " + path);
    HashCodeDB db;
    db.k_bits = read_u32(is);
    db.n = read_u32(is);
    db.labels.resize(db.n);
    for (auto& label : db.labels) label = read_u32(is);
    // Ids are positional in the file format.
    db.ids.resize(db.n);
    for (std::size_t i = 0; i < db.n; ++i) db.ids[i] = static_cast<std::uint32_t>(i);
    db.packed.resize(db.n * db.bytes_per_row());
    is.read(reinterpret_cast<char*>(db.packed.data()),
            static_cast<std::streamsize>(db.packed.size()));
    if (!is) throw data_error("truncated code file: " + path);
    return db;
}

} // namespace razh
