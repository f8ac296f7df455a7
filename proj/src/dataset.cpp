#include "razh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

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

void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

float read_f32(std::istream& is) {
    const std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

} // namespace

void Dataset::validate() const {
    if (images.size() != labels.size())
        throw data_error("Dataset: image/label count mismatch");
    for (std::size_t y : labels)
        if (y >= n_classes()) throw data_error("Dataset: label out of range");
    if (class_attributes.size() != n_classes())
        throw data_error("Dataset: class_attributes row count mismatch");
    for (const auto& row : class_attributes) {
        if (row.size() != n_attributes())
            throw data_error("Dataset: class_attributes column count mismatch");
        if (std::find(row.begin(), row.end(), std::uint8_t{1}) == row.end())
            throw data_error("Dataset: class with no attributes");
    }
    for (const Tensor2& img : images)
        if (img.rows() != height || img.cols() != width)
            throw data_error("Dataset: image size mismatch");
}

const Tensor2& WordVectorTable::get(const std::string& name) const {
    auto it = vectors.find(name);
    if (it == vectors.end())
        throw data_error("no word vector for attribute '" + name + "'");
    return it->second;
}

std::size_t synth_patch_owner(std::size_t pos, std::size_t n_attrs) {
    return pos % n_attrs;
}

Dataset synth_generate(std::size_t n_classes, std::size_t n_attrs,
                       std::size_t samples_per_class, std::size_t image_size,
                       std::size_t patch_size, std::uint64_t seed) {
    if (patch_size == 0 || image_size % patch_size != 0)
        throw config_error("synth_generate: image size not divisible by patch size");
    if (n_attrs < 2) throw config_error("synth_generate: need at least 2 attributes");
    if (n_classes == 0 || samples_per_class == 0)
        throw config_error("synth_generate: empty dataset requested");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);

    // One texture motif per attribute, plus a neutral background.
    std::vector<Tensor2> motifs;
    motifs.reserve(n_attrs);
    for (std::size_t a = 0; a < n_attrs; ++a) {
        Tensor2 m(patch_size, patch_size);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = unit(rng);
        motifs.push_back(std::move(m));
    }

    // Distinct nonempty attribute masks per class.
    std::vector<std::vector<std::uint8_t>> masks;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<std::uint8_t> mask(n_attrs);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000)
                throw config_error("synth_generate: cannot draw distinct class masks; "
                                   "too few attributes for the class count");
            for (auto& b : mask) b = coin(rng) ? 1 : 0;
            const bool nonempty =
                std::find(mask.begin(), mask.end(), std::uint8_t{1}) != mask.end();
            const bool fresh =
                std::find(masks.begin(), masks.end(), mask) == masks.end();
            if (nonempty && fresh) break;
        }
        masks.push_back(mask);
    }

    const std::size_t grid = image_size / patch_size;
    Dataset ds;
    ds.height = image_size;
    ds.width = image_size;
    ds.channels = 1;
    ds.class_attributes = masks;
    for (std::size_t c = 0; c < n_classes; ++c)
        ds.class_names.push_back("class" + std::to_string(c));
    for (std::size_t a = 0; a < n_attrs; ++a)
        ds.attribute_names.push_back("attr" + std::to_string(a));

    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s) {
            Tensor2 img(image_size, image_size);
            for (std::size_t gr = 0; gr < grid; ++gr) {
                for (std::size_t gc = 0; gc < grid; ++gc) {
                    const std::size_t pos = gr * grid + gc;
                    const std::size_t owner = synth_patch_owner(pos, n_attrs);
                    const bool has = masks[c][owner] != 0;
                    for (std::size_t i = 0; i < patch_size; ++i)
                        for (std::size_t j = 0; j < patch_size; ++j) {
                            const double base = has ? motifs[owner].at(i, j) : 0.5;
                            const double v = base + noise(rng);
                            img.at(gr * patch_size + i, gc * patch_size + j) =
                                std::clamp(v, 0.0, 1.0);
                        }
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(c);
        }
    }
    ds.validate();
    return ds;
}

ZeroShotSplit make_split(const Dataset& ds, std::size_t n_unseen, std::uint64_t seed) {
    const std::size_t c = ds.n_classes();
    if (n_unseen == 0 || n_unseen >= c)
        throw config_error("make_split: n_unseen must be in (0, n_classes)");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    ZeroShotSplit split;
    split.unseen.assign(order.begin(), order.begin() + static_cast<long>(n_unseen));
    split.seen.assign(order.begin() + static_cast<long>(n_unseen), order.end());
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());

    std::vector<bool> is_unseen(c, false);
    for (std::size_t u : split.unseen) is_unseen[u] = true;

    // Per class: seen classes put 75% into train; unseen classes put 50%
    // into test. Everything else lands in the retrieval set.
    std::vector<std::vector<std::size_t>> by_class(c);
    for (std::size_t i = 0; i < ds.n_samples(); ++i)
        by_class[ds.labels[i]].push_back(i);

    for (std::size_t cls = 0; cls < c; ++cls) {
        auto ids = by_class[cls];
        std::shuffle(ids.begin(), ids.end(), rng);
        if (is_unseen[cls]) {
            const std::size_t n_test = ids.size() / 2;
            for (std::size_t i = 0; i < ids.size(); ++i)
                (i < n_test ? split.test_ids : split.retrieval_ids).push_back(ids[i]);
        } else {
            const std::size_t n_train = (ids.size() * 3) / 4;
            for (std::size_t i = 0; i < ids.size(); ++i)
                (i < n_train ? split.train_ids : split.retrieval_ids).push_back(ids[i]);
        }
    }
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    std::sort(split.retrieval_ids.begin(), split.retrieval_ids.end());
    return split;
}

SimilarityMatrix build_similarity(const std::vector<std::size_t>& labels) {
    if (labels.empty()) throw config_error("build_similarity: empty batch");
    SimilarityMatrix s;
    s.n = labels.size();
    s.bits.assign(s.n * s.n, 0);
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.n; ++j)
            s.bits[i * s.n + j] = labels[i] == labels[j] ? 1 : 0;
    return s;
}

AttributeSplit attribute_split(const Dataset& ds, std::size_t class_id) {
    if (class_id >= ds.n_classes())
        throw config_error("attribute_split: class id out of range");
    AttributeSplit out;
    const auto& row = ds.class_attributes[class_id];
    for (std::size_t a = 0; a < row.size(); ++a)
        (row[a] ? out.present : out.absent).push_back(a);
    return out;
}

WordVectorTable load_word_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open word-vector file: " + path);
    WordVectorTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name;
        ss >> name;
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (name.empty() || values.empty() || !ss.eof())
            throw data_error("malformed word-vector row at line " +
                             std::to_string(lineno));
        if (table.dim == 0) table.dim = values.size();
        if (values.size() != table.dim)
            throw data_error("word-vector dimension mismatch at line " +
                             std::to_string(lineno));
        if (table.vectors.count(name))
            throw data_error("duplicate word-vector name '" + name + "'");
        Tensor2 vec(table.dim, 1, values);
        double norm = 0.0;
        for (std::size_t i = 0; i < vec.size(); ++i) norm += vec[i] * vec[i];
        if (norm == 0.0)
            throw data_error("zero-norm word vector '" + name + "'");
        table.vectors.emplace(name, std::move(vec));
    }
    return table;
}

WordVectorTable synth_word_vectors(const std::vector<std::string>& names,
                                   std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw config_error("synth_word_vectors: dim must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    WordVectorTable table;
    table.dim = dim;
    std::vector<Tensor2> accepted;
    for (const std::string& name : names) {
        if (table.vectors.count(name))
            throw data_error("duplicate attribute name '" + name + "'");
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100000)
                throw config_error("synth_word_vectors: rejection sampling failed; "
                                   "increase dim or relax the cosine bound");
            Tensor2 v(dim, 1);
            double norm = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                v[i] = gauss(rng);
                norm += v[i] * v[i];
            }
            norm = std::sqrt(norm);
            if (norm == 0.0) continue;
            for (std::size_t i = 0; i < dim; ++i) v[i] /= norm;
            bool ok = true;
            for (const Tensor2& u : accepted) {
                double cos = 0.0;
                for (std::size_t i = 0; i < dim; ++i) cos += u[i] * v[i];
                if (std::fabs(cos) >= 0.5) { ok = false; break; }
            }
            if (ok) {
                accepted.push_back(v);
                table.vectors.emplace(name, std::move(v));
                break;
            }
        }
    }
    return table;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot write dataset file: " + path);
    os.write("RZDS", 4);
    write_u32(os, 1); // version
    write_u32(os, static_cast<std::uint32_t>(ds.n_classes()));
    write_u32(os, static_cast<std::uint32_t>(ds.n_samples()));
    write_u32(os, static_cast<std::uint32_t>(ds.n_attributes()));
    write_u32(os, static_cast<std::uint32_t>(ds.height));
    write_u32(os, static_cast<std::uint32_t>(ds.width));
    write_u32(os, static_cast<std::uint32_t>(ds.channels));
    for (const auto& row : ds.class_attributes)
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    for (std::size_t y : ds.labels) write_u32(os, static_cast<std::uint32_t>(y));
    for (const Tensor2& img : ds.images)
        for (std::size_t i = 0; i < img.size(); ++i)
            write_f32(os, static_cast<float>(img[i]));
    if (!os) throw data_error("write failure on dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open dataset file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "RZDS", 4) != 0)
        throw data_error("not a dataset file (bad magic): " + path);
    const std::uint32_t version = read_u32(is);
    if (version != 1)
        throw data_error("unsupported dataset version " + std::to_string(version));
    Dataset ds;
    const std::size_t c = read_u32(is);
    const std::size_t n = read_u32(is);
    const std::size_t na = read_u32(is);
    ds.height = read_u32(is);
    ds.width = read_u32(is);
    ds.channels = read_u32(is);
    if (ds.channels != 1)
        throw data_error("only single-channel datasets are supported");
    for (std::size_t i = 0; i < c; ++i)
        ds.class_names.push_back("class" + std::to_string(i));
    for (std::size_t i = 0; i < na; ++i)
        ds.attribute_names.push_back("attr" + std::to_string(i));
    ds.class_attributes.assign(c, std::vector<std::uint8_t>(na));
    for (auto& row : ds.class_attributes) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!is) throw data_error("truncated dataset file: " + path);
    }
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(read_u32(is));
    for (std::size_t i = 0; i < n; ++i) {
        Tensor2 img(ds.height, ds.width);
        for (std::size_t j = 0; j < img.size(); ++j)
            img[j] = static_cast<double>(read_f32(is));
        ds.images.push_back(std::move(img));
    }
    ds.validate();
    return ds;
}

void save_split(const ZeroShotSplit& split, const std::string& path) {
    nlohmann::json j;
    j["seen"] = split.seen;
    j["unseen"] = split.unseen;
    j["train_ids"] = split.train_ids;
    j["test_ids"] = split.test_ids;
    j["retrieval_ids"] = split.retrieval_ids;
    std::ofstream os(path);
    if (!os) throw data_error("cannot write split file: " + path);
    os << j.dump(2) << "\n";
}

ZeroShotSplit load_split(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open split file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("split file parse error: " + std::string(e.what()));
    }
    ZeroShotSplit split;
    split.seen = j.at("seen").get<std::vector<std::size_t>>();
    split.unseen = j.at("unseen").get<std::vector<std::size_t>>();
    split.train_ids = j.at("train_ids").get<std::vector<std::size_t>>();
    split.test_ids = j.at("test_ids").get<std::vector<std::size_t>>();
    split.retrieval_ids = j.at("retrieval_ids").get<std::vector<std::size_t>>();
    return split;
}

} // namespace razh
