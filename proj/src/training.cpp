#include "razh/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "razh/attribute_embedding.hpp"
#include "razh/hash_head.hpp"
#include "razh/patching.hpp"

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

void write_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw data_error("unexpected end of file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
    // splitmix64 step, keyed by the global sample id
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (id + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct SampleOut {
    Var h_row;   // 1 x K
    Var ha_row;  // 1 x K
    Var prob_row; // 1 x C
    Var recon;   // 1 x 1
};

/// Algorithm core: one image through both branches on the given tape.
SampleOut forward_sample(Tape& tape, const Dataset& ds, std::size_t id,
                         const WordVectorTable& words, const ModelConfig& cfg,
                         std::uint64_t kmeans_seed, std::mt19937_64& select_rng) {
    const std::size_t m = cfg.patch_count();
    const Tensor2 raw = extract_patches(ds.images[id], cfg.patch_size);
    Var raw_t = tape.constant(transpose(raw)); // patch_dim x M
    Var emb = tape.add_col(tape.matmul_op(tape.param("proj_w"), raw_t),
                           tape.param("proj_b"));

    const ClusterModel cm = kmeans(tape.value(emb), cfg.k_clusters, kmeans_seed);
    Var parts = tape.cluster_means(emb, cm.assignment, cm.k);
    Var mapped = tape.add_col(tape.matmul_op(tape.param("fm_w"), parts),
                              tape.param("fm_b"));

    const std::size_t label = ds.labels[id];
    const AttributeSplit asplit = attribute_split(ds, label);
    Var attrs = tape.add_col(
        tape.matmul_op(tape.param("fa_w"),
                       tape.constant(word_matrix(ds.attribute_names, asplit.present, words))),
        tape.param("fa_b"));

    AttributeEmbeddings embs;
    embs.present = tape.value(attrs);
    embs.present_ids = asplit.present;
    const MatchResult match = top_sim(embs, tape.value(mapped));

    Var lifted = tape.add_col(
        tape.matmul_op(tape.param("fi_w"), tape.gather_cols(attrs, match.present_col)),
        tape.param("fi_b"));
    const MixedSequence mixed =
        mix(tape.value(emb), cm, match, tape.value(lifted), cfg.threshold);
    Var z = tape.mix_cols(emb, lifted, cm.assignment, mixed.replaced_cluster);

    std::vector<std::size_t> all(m);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Var enc_a = encode(tape, cfg, z, all);
    Var g_z = decode(tape, cfg, enc_a);
    Var ha = hash_forward_op(tape, pool(tape, enc_a));

    const auto selected = select_patches(m, cfg.selection_ratio, select_rng);
    Var enc = encode(tape, cfg, tape.gather_cols(emb, selected), selected);
    Var g_x = decode(tape, cfg, pad_with_mask(tape, enc, selected, m));
    Var h = hash_forward_op(tape, pool(tape, enc));

    SampleOut out;
    out.recon = recon_loss_op(tape, g_z, g_x, tape.value(raw_t), selected);
    Var logits = tape.add(
        tape.matmul_op(tape.transpose_op(tape.param("cls_w")), h), tape.param("cls_b"));
    out.prob_row = tape.softmax_rows_op(tape.transpose_op(logits));
    out.h_row = tape.transpose_op(h);
    out.ha_row = tape.transpose_op(ha);
    return out;
}

} // namespace

BatchForward forward_batch(Tape& tape, const Dataset& ds,
                           const std::vector<std::size_t>& ids,
                           const WordVectorTable& words, const ModelConfig& cfg,
                           std::uint64_t seed) {
    if (ids.empty()) throw config_error("forward_batch: empty batch");
    std::mt19937_64 select_rng(mix_seed(seed, 0x5e1ec7));
    std::vector<Var> h_rows, ha_rows, prob_rows;
    BatchForward out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const SampleOut s = forward_sample(tape, ds, ids[i], words, cfg,
                                           mix_seed(seed, ids[i]), select_rng);
        h_rows.push_back(s.h_row);
        ha_rows.push_back(s.ha_row);
        prob_rows.push_back(s.prob_row);
        out.rec = i == 0 ? s.recon : tape.add(out.rec, s.recon);
    }
    out.h = tape.concat_rows(h_rows);
    out.ha = tape.concat_rows(ha_rows);
    out.probs = tape.concat_rows(prob_rows);
    return out;
}

namespace {

void check_finite(double v, std::size_t epoch, std::size_t batch, const char* part) {
    if (!std::isfinite(v))
        throw numeric_error("training aborted: non-finite " + std::string(part) +
                            " loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch));
}

} // namespace

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps) {
    if (!store.grads_live)
        throw usage_error("adam_step: no fresh gradients; run backward first");
    ++store.step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(store.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(store.step_count));
    for (const auto& name : store.names()) {
        auto& e = store.entry(name);
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
            e.value[i] -= lr * (e.m[i] / bc1) / (std::sqrt(e.v[i] / bc2) + eps);
        }
    }
    store.zero_grads();
}

TrainResult train(const Dataset& ds, const ZeroShotSplit& split,
                  const WordVectorTable& words, const TrainConfig& cfg) {
    ModelConfig model = cfg.model;
    if (model.n_classes == 0) model.n_classes = ds.n_classes();
    if (model.n_classes != ds.n_classes())
        throw config_error("train: n_classes does not match dataset");
    if (model.word_dim != words.dim)
        throw config_error("train: word_dim does not match word-vector table");
    if (model.image_size != ds.height || ds.height != ds.width)
        throw config_error("train: image size does not match dataset");
    if (cfg.batch_size == 0 || cfg.epochs == 0)
        throw config_error("train: epochs and batch_size must be positive");

    // Zero-shot hygiene: only seen-class images may touch parameters.
    std::vector<bool> is_seen(ds.n_classes(), false);
    for (std::size_t c : split.seen) is_seen[c] = true;
    for (std::size_t id : split.train_ids)
        if (!is_seen[ds.labels[id]])
            throw data_error("train: train id " + std::to_string(id) +
                             " belongs to an unseen class");

    TrainResult out;
    out.checkpoint.config = cfg;
    out.checkpoint.config.model = model;
    ParamStore& store = out.checkpoint.params;
    init_model_params(store, model, cfg.seed);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order = split.train_ids;
    const LossWeights weights{cfg.alpha, cfg.beta};

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double e_cls = 0, e_hash = 0, e_rec = 0, e_hal = 0, e_total = 0;
        std::size_t n_batches = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            const std::size_t n = end - start;
            const std::size_t batch_no = start / cfg.batch_size;
            Tape tape(&store);

            const std::vector<std::size_t> batch_ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                     order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<std::size_t> batch_labels;
            for (std::size_t id : batch_ids) batch_labels.push_back(ds.labels[id]);

            const BatchForward fwd =
                forward_batch(tape, ds, batch_ids, words, model,
                              mix_seed(cfg.seed, epoch * 7919 + batch_no));
            Var h = fwd.h;
            Var ha = fwd.ha;
            Var probs = fwd.probs;
            Var rec_sum = fwd.rec;

            const SimilarityMatrix sim = build_similarity(batch_labels);
            const PairWeights pw = pair_weights(sim);
            Tensor2 y(n, model.n_classes);
            for (std::size_t i = 0; i < n; ++i) y.at(i, batch_labels[i]) = 1.0;

            Var l_cls = cls_loss_op(tape, probs, y);
            Var l_hash = hash_loss_op(tape, h, sim, pw);
            Var l_hal = hal_loss_op(tape, ha, h);
            Var total = tape.add(
                l_cls, tape.add(tape.scale(l_hash, cfg.alpha),
                                tape.scale(tape.add(rec_sum, l_hal), cfg.beta)));

            check_finite(tape.value(l_cls)[0], epoch, batch_no, "classification");
            check_finite(tape.value(l_hash)[0], epoch, batch_no, "hash");
            check_finite(tape.value(rec_sum)[0], epoch, batch_no, "reconstruction");
            check_finite(tape.value(l_hal)[0], epoch, batch_no, "alignment");

            e_cls += tape.value(l_cls)[0];
            e_hash += tape.value(l_hash)[0];
            e_rec += tape.value(rec_sum)[0];
            e_hal += tape.value(l_hal)[0];
            e_total += total_loss(tape.value(l_cls)[0], tape.value(l_hash)[0],
                                  tape.value(rec_sum)[0] + tape.value(l_hal)[0], weights);
            ++n_batches;

            tape.backward(total);
            adam_step(store, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam);
        }

        const double nb = static_cast<double>(n_batches);
        out.history.cls.push_back(e_cls / nb);
        out.history.hash.push_back(e_hash / nb);
        out.history.rec.push_back(e_rec / nb);
        out.history.hal.push_back(e_hal / nb);
        out.history.total.push_back(e_total / nb);
    }

    out.checkpoint.epoch = cfg.epochs;
    std::ostringstream rs;
    rs << rng;
    out.checkpoint.rng_state = rs.str();
    return out;
}

Tensor2 relaxed_code(const Dataset& ds, std::size_t id, ParamStore& store,
                     const ModelConfig& cfg) {
    Tape tape(&store);
    Var raw_t = tape.constant(transpose(extract_patches(ds.images[id], cfg.patch_size)));
    Var emb = tape.add_col(tape.matmul_op(tape.param("proj_w"), raw_t),
                           tape.param("proj_b"));
    std::vector<std::size_t> all(cfg.patch_count());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Var h = hash_forward_op(tape, pool(tape, encode(tape, cfg, emb, all)));
    return tape.value(h);
}

std::vector<HashCode> encode_codes(const Dataset& ds,
                                   const std::vector<std::size_t>& ids,
                                   ParamStore& store, const ModelConfig& cfg) {
    std::vector<HashCode> out;
    out.reserve(ids.size());
    for (std::size_t id : ids) out.push_back(binarize(relaxed_code(ds, id, store, cfg)));
    return out;
}

HashCodeDB encode_db(const Dataset& ds, const std::vector<std::size_t>& ids,
                     ParamStore& store, const ModelConfig& cfg) {
    std::vector<std::uint32_t> labels, dbids;
    labels.reserve(ids.size());
    dbids.reserve(ids.size());
    for (std::size_t id : ids) {
        labels.push_back(static_cast<std::uint32_t>(ds.labels[id]));
        dbids.push_back(static_cast<std::uint32_t>(id));
    }
    return build_db(encode_codes(ds, ids, store, cfg), labels, dbids);
}

GridSearchResult grid_search(const Dataset& ds, const ZeroShotSplit& split,
                             const WordVectorTable& words,
                             const std::vector<double>& alpha_grid,
                             const std::vector<double>& beta_grid,
                             const TrainConfig& base) {
    if (alpha_grid.empty() || beta_grid.empty())
        throw config_error("grid_search: empty grid");
    GridSearchResult out;
    for (double alpha : alpha_grid) {
        for (double beta : beta_grid) {
            TrainConfig cfg = base;
            cfg.alpha = alpha;
            cfg.beta = beta;
            TrainResult res = train(ds, split, words, cfg);
            ParamStore& store = res.checkpoint.params;
            const HashCodeDB queries =
                encode_db(ds, split.test_ids, store, res.checkpoint.config.model);
            const HashCodeDB db =
                encode_db(ds, split.retrieval_ids, store, res.checkpoint.config.model);
            GridCell cell{alpha, beta, map_at_k(queries, db, std::min<std::size_t>(5000, db.n))};
            out.table.push_back(cell);
        }
    }
    // Argmax with ties to smaller alpha, then smaller beta.
    const GridCell* best = &out.table.front();
    for (const GridCell& cell : out.table) {
        if (cell.map > best->map ||
            (cell.map == best->map &&
             (cell.alpha < best->alpha ||
              (cell.alpha == best->alpha && cell.beta < best->beta))))
            best = &cell;
    }
    out.best_alpha = best->alpha;
    out.best_beta = best->beta;
    return out;
}

namespace {

std::string config_block(const TrainConfig& cfg, long step_count) {
    char buf[64];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream os;
    const ModelConfig& mdl = cfg.model;
    os << "image_size=" << mdl.image_size << "\npatch_size=" << mdl.patch_size
       << "\nd_v=" << mdl.d_v << "\nd_a=" << mdl.d_a << "\nword_dim=" << mdl.word_dim
       << "\ncode_length=" << mdl.code_length << "\nn_classes=" << mdl.n_classes
       << "\nk_clusters=" << mdl.k_clusters << "\nthreshold=" << real(mdl.threshold)
       << "\nselection_ratio=" << real(mdl.selection_ratio)
       << "\nencoder_tanh=" << (mdl.encoder_tanh ? 1 : 0) << "\nepochs=" << cfg.epochs
       << "\nbatch_size=" << cfg.batch_size
       << "\nlearning_rate=" << real(cfg.learning_rate) << "\nbeta1=" << real(cfg.beta1)
       << "\nbeta2=" << real(cfg.beta2) << "\neps_adam=" << real(cfg.eps_adam)
       << "\nseed=" << cfg.seed << "\nalpha=" << real(cfg.alpha)
       << "\nbeta=" << real(cfg.beta) << "\nstep_count=" << step_count << "\n";
    return os.str();
}

void parse_config_block(const std::string& text, TrainConfig& cfg, long& step_count) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error("checkpoint: malformed config line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        ModelConfig& mdl = cfg.model;
        try {
            if (key == "image_size") mdl.image_size = std::stoul(val);
            else if (key == "patch_size") mdl.patch_size = std::stoul(val);
            else if (key == "d_v") mdl.d_v = std::stoul(val);
            else if (key == "d_a") mdl.d_a = std::stoul(val);
            else if (key == "word_dim") mdl.word_dim = std::stoul(val);
            else if (key == "code_length") mdl.code_length = std::stoul(val);
            else if (key == "n_classes") mdl.n_classes = std::stoul(val);
            else if (key == "k_clusters") mdl.k_clusters = std::stoul(val);
            else if (key == "threshold") mdl.threshold = std::stod(val);
            else if (key == "selection_ratio") mdl.selection_ratio = std::stod(val);
            else if (key == "encoder_tanh") mdl.encoder_tanh = std::stoul(val) != 0;
            else if (key == "epochs") cfg.epochs = std::stoul(val);
            else if (key == "batch_size") cfg.batch_size = std::stoul(val);
            else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
            else if (key == "beta1") cfg.beta1 = std::stod(val);
            else if (key == "beta2") cfg.beta2 = std::stod(val);
            else if (key == "eps_adam") cfg.eps_adam = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "beta") cfg.beta = std::stod(val);
            else if (key == "step_count") step_count = std::stol(val);
            else throw data_error("checkpoint: unknown config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw data_error("checkpoint: bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw data_error("checkpoint: bad value for '" + key + "'");
        }
    }
}

void write_array(std::ostream& os, const std::string& name, const Tensor2& t) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rows()));
    write_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) write_f64(os, t[i]);
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot write checkpoint: " + path);
    os.write("RZCK", 4);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(cp.epoch));

    const std::string cfg = config_block(cp.config, cp.params.step_count);
    write_u32(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    write_u32(os, static_cast<std::uint32_t>(cp.rng_state.size()));
    os.write(cp.rng_state.data(), static_cast<std::streamsize>(cp.rng_state.size()));

    const auto names = cp.params.names();
    write_u32(os, static_cast<std::uint32_t>(names.size() * 3));
    for (const auto& name : names) {
        const auto& e = cp.params.entry(name);
        write_array(os, name, e.value);
        write_array(os, name + "#m", e.m);
        write_array(os, name + "#v", e.v);
    }
    if (!os) throw data_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "RZCK", 4) != 0)
        throw data_error("bad checkpoint magic: " + path);
    if (read_u32(is) != 1) throw data_error("unsupported checkpoint version: " + path);

    Checkpoint cp;
    cp.epoch = read_u32(is);
    std::string cfg_text(read_u32(is), '\0');
    is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    std::string rng(read_u32(is), '\0');
    is.read(rng.data(), static_cast<std::streamsize>(rng.size()));
    if (!is) throw data_error("truncated checkpoint: " + path);
    cp.rng_state = rng;

    long step_count = 0;
    parse_config_block(cfg_text, cp.config, step_count);

    const std::uint32_t n_arrays = read_u32(is);
    std::map<std::string, Tensor2> arrays;
    for (std::uint32_t a = 0; a < n_arrays; ++a) {
        std::string name(read_u32(is), '\0');
        is.read(name.data(), static_cast<std::streamsize>(name.size()));
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        Tensor2 t(rows, cols);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = read_f64(is);
        arrays.emplace(std::move(name), std::move(t));
    }
    for (auto& [name, t] : arrays)
        if (name.find('#') == std::string::npos) cp.params.add(name, t);
    for (auto& [name, t] : arrays) {
        const auto hash_pos = name.find('#');
        if (hash_pos == std::string::npos) continue;
        auto& e = cp.params.entry(name.substr(0, hash_pos));
        const std::string kind = name.substr(hash_pos + 1);
        if (kind == "m") e.m = t;
        else if (kind == "v") e.v = t;
        else throw data_error("checkpoint: unknown array suffix in '" + name + "'");
    }
    cp.params.step_count = step_count;
    return cp;
}

} // namespace razh
