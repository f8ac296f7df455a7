// Command-line surface for the whole pipeline: synthesize data, split,
// train, encode, evaluate, grid-search, gradient-check, confusion tables.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "razh/gradcheck.hpp"
#include "razh/losses.hpp"
#include "razh/retrieval.hpp"
#include "razh/training.hpp"

using namespace razh;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// UTF-8 `key = value` lines, `#` comments; unknown keys rejected.
TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file: " + path);
    TrainConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        ModelConfig& mdl = cfg.model;
        try {
            if (key == "image_size") mdl.image_size = std::stoul(val);
            else if (key == "patch_size") mdl.patch_size = std::stoul(val);
            else if (key == "d_v") mdl.d_v = std::stoul(val);
            else if (key == "d_a") mdl.d_a = std::stoul(val);
            else if (key == "word_dim") mdl.word_dim = std::stoul(val);
            else if (key == "code_length") mdl.code_length = std::stoul(val);
            else if (key == "k_clusters") mdl.k_clusters = std::stoul(val);
            else if (key == "threshold") mdl.threshold = std::stod(val);
            else if (key == "selection_ratio") mdl.selection_ratio = std::stod(val);
            else if (key == "epochs") cfg.epochs = std::stoul(val);
            else if (key == "batch_size") cfg.batch_size = std::stoul(val);
            else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
            else if (key == "beta1") cfg.beta1 = std::stod(val);
            else if (key == "beta2") cfg.beta2 = std::stod(val);
            else if (key == "eps_adam") cfg.eps_adam = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "beta") cfg.beta = std::stod(val);
            else
                throw config_error("config line " + std::to_string(lineno) +
                                   ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw config_error("config line " + std::to_string(lineno) +
                               ": bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw config_error("config line " + std::to_string(lineno) +
                               ": bad value for '" + key + "'");
        }
    }
    return cfg;
}

WordVectorTable resolve_words(const std::string& words_path, const Dataset& ds,
                              const TrainConfig& cfg) {
    if (!words_path.empty()) return load_word_vectors(words_path);
    return synth_word_vectors(ds.attribute_names, cfg.model.word_dim, cfg.seed);
}

const std::vector<std::size_t>& pick_ids(const ZeroShotSplit& split,
                                         const std::string& which) {
    if (which == "train") return split.train_ids;
    if (which == "test") return split.test_ids;
    if (which == "retrieval") return split.retrieval_ids;
    throw config_error("--ids must be train, test, retrieval, or all");
}

std::vector<double> parse_reals(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (...) {
            throw config_error(std::string("bad value in ") + what + ": '" + item + "'");
        }
    }
    if (out.empty()) throw config_error(std::string(what) + " must be nonempty");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write: " + path);
    os << text;
    if (!os) throw data_error("write failed: " + path);
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

int cmd_synth(const std::string& out, std::size_t classes, std::size_t attrs,
              std::size_t per_class, std::size_t size, std::size_t patch,
              std::uint64_t seed) {
    save_dataset(synth_generate(classes, attrs, per_class, size, patch, seed), out);
    return 0;
}

int cmd_split(const std::string& ds_path, std::size_t unseen, std::uint64_t seed,
              const std::string& out) {
    const Dataset ds = load_dataset(ds_path);
    save_split(make_split(ds, unseen, seed), out);
    return 0;
}

int cmd_train(const std::string& ds_path, const std::string& split_path,
              const std::string& cfg_path, const std::string& words_path,
              const std::string& out) {
    const Dataset ds = load_dataset(ds_path);
    const ZeroShotSplit split = load_split(split_path);
    const TrainConfig cfg = load_train_config(cfg_path);
    const WordVectorTable words = resolve_words(words_path, ds, cfg);

    const TrainResult res = train(ds, split, words, cfg);
    std::cout << "epoch\ttotal\tcls\thash\trec\thal\n";
    for (std::size_t e = 0; e < res.history.total.size(); ++e)
        std::cout << (e + 1) << '\t' << fmt(res.history.total[e]) << '\t'
                  << fmt(res.history.cls[e]) << '\t' << fmt(res.history.hash[e]) << '\t'
                  << fmt(res.history.rec[e]) << '\t' << fmt(res.history.hal[e]) << '\n';
    save_checkpoint(out, res.checkpoint);
    return 0;
}

int cmd_encode(const std::string& model_path, const std::string& ds_path,
               const std::string& split_path, const std::string& which,
               const std::string& out) {
    const Dataset ds = load_dataset(ds_path);
    Checkpoint cp = load_checkpoint(model_path);
    std::vector<std::size_t> ids;
    if (which == "all") {
        ids.resize(ds.n_samples());
        std::iota(ids.begin(), ids.end(), std::size_t{0});
    } else {
        if (split_path.empty())
            throw config_error("--split is required unless --ids all");
        ids = pick_ids(load_split(split_path), which);
    }
    save_codes(out, encode_db(ds, ids, cp.params, cp.config.model));
    return 0;
}

std::vector<std::size_t> n_grid(std::size_t db_size) {
    std::vector<std::size_t> grid;
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{5}, std::size_t{10},
                          std::size_t{20}, std::size_t{50}, std::size_t{100},
                          std::size_t{200}, std::size_t{500}, std::size_t{1000}})
        if (n <= db_size) grid.push_back(n);
    if (grid.empty() || grid.back() != db_size) grid.push_back(db_size);
    return grid;
}

int cmd_eval(const std::string& codes_path, const std::string& queries_path,
             std::size_t cutoff, const std::string& curves_dir, bool self_exclude) {
    const HashCodeDB db = load_codes(codes_path);
    const HashCodeDB queries = load_codes(queries_path);
    std::cout << "metric\tvalue\n";
    std::cout << "map\t" << fmt(map_at_k(queries, db, cutoff, self_exclude)) << '\n';

    if (!curves_dir.empty()) {
        std::filesystem::create_directories(curves_dir);
        const auto grid = n_grid(db.n);
        std::ostringstream pr, pn, rn;
        pr << "recall\tprecision\n";
        for (const auto& pt : pr_curve(queries, db, self_exclude))
            pr << fmt(pt.x) << '\t' << fmt(pt.y) << '\n';
        pn << "n\tprecision\n";
        for (const auto& pt : p_at_n(queries, db, grid, self_exclude))
            pn << static_cast<std::size_t>(pt.x) << '\t' << fmt(pt.y) << '\n';
        rn << "n\trecall\n";
        for (const auto& pt : r_at_n(queries, db, grid, self_exclude))
            rn << static_cast<std::size_t>(pt.x) << '\t' << fmt(pt.y) << '\n';
        const std::filesystem::path dir(curves_dir);
        write_text((dir / "pr.tsv").string(), pr.str());
        write_text((dir / "p_at_n.tsv").string(), pn.str());
        write_text((dir / "r_at_n.tsv").string(), rn.str());
    }
    return 0;
}

int cmd_grid(const std::string& ds_path, const std::string& split_path,
             const std::string& cfg_path, const std::string& words_path,
             const std::string& alphas, const std::string& betas) {
    const Dataset ds = load_dataset(ds_path);
    const ZeroShotSplit split = load_split(split_path);
    const TrainConfig cfg = load_train_config(cfg_path);
    const WordVectorTable words = resolve_words(words_path, ds, cfg);

    const GridSearchResult r =
        grid_search(ds, split, words, parse_reals(alphas, "--alphas"),
                    parse_reals(betas, "--betas"), cfg);
    std::cout << "alpha\tbeta\tmap\n";
    for (const auto& cell : r.table)
        std::cout << fmt(cell.alpha) << '\t' << fmt(cell.beta) << '\t' << fmt(cell.map)
                  << '\n';
    std::cout << "best\t" << fmt(r.best_alpha) << '\t' << fmt(r.best_beta) << '\n';
    return 0;
}

int cmd_gradcheck(const std::string& cfg_path) {
    TrainConfig cfg;
    if (!cfg_path.empty()) cfg = load_train_config(cfg_path);
    // Default desk-scale shapes: d_v=32, M=16, K=16, K'=4, 3 classes.
    cfg.model.n_classes = 3;
    const Dataset ds = synth_generate(3, 4, 2, cfg.model.image_size,
                                      cfg.model.patch_size, cfg.seed);
    const WordVectorTable words =
        synth_word_vectors(ds.attribute_names, cfg.model.word_dim, cfg.seed + 1);
    const std::vector<std::size_t> batch = {0, 2, 4};
    const SimilarityMatrix sim =
        build_similarity({ds.labels[0], ds.labels[2], ds.labels[4]});
    const PairWeights pw = pair_weights(sim);
    Tensor2 y(batch.size(), cfg.model.n_classes);
    for (std::size_t i = 0; i < batch.size(); ++i) y.at(i, ds.labels[batch[i]]) = 1.0;

    ParamStore store;
    init_model_params(store, cfg.model, cfg.seed + 2);

    enum Component { CLS, HASH, REC, HAL, TOTAL };
    const char* names[] = {"cls", "hash", "rec", "hal", "total"};
    double worst = 0.0;
    for (int comp = CLS; comp <= TOTAL; ++comp) {
        LossBuilder builder = [&](Tape& t, ParamStore&) {
            const BatchForward f =
                forward_batch(t, ds, batch, words, cfg.model, cfg.seed + 3);
            switch (comp) {
            case CLS: return cls_loss_op(t, f.probs, y);
            case HASH: return hash_loss_op(t, f.h, sim, pw);
            case REC: return f.rec;
            case HAL: return hal_loss_op(t, f.ha, f.h);
            default:
                return t.add(cls_loss_op(t, f.probs, y),
                             t.add(t.scale(hash_loss_op(t, f.h, sim, pw), cfg.alpha),
                                   t.scale(t.add(f.rec, hal_loss_op(t, f.ha, f.h)),
                                           cfg.beta)));
            }
        };
        store.zero_grads();
        const GradCheckResult r = finite_diff_check(builder, store, 1e-5, 4, 51);
        std::cout << names[comp] << '\t' << fmt(r.max_rel_error) << '\n';
        worst = std::max(worst, r.max_rel_error);
    }
    if (worst > 1e-4) throw numeric_error("gradient check failed: max relative error " + fmt(worst));
    return 0;
}

int cmd_confusion(const std::string& codes_path, const std::string& out) {
    const HashCodeDB db = load_codes(codes_path);
    std::uint32_t n_classes = 0;
    for (std::uint32_t label : db.labels) n_classes = std::max(n_classes, label + 1);
    const ConfusionResult r = class_confusion(db, n_classes);

    std::ostringstream os;
    os << "class";
    for (std::uint32_t c : r.classes) os << '\t' << c;
    os << '\n';
    for (std::size_t a = 0; a < r.classes.size(); ++a) {
        os << r.classes[a];
        for (std::size_t b = 0; b < r.classes.size(); ++b)
            os << '\t' << fmt(r.matrix.at(a, b));
        os << '\n';
    }
    write_text(out, os.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot hashing pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    std::size_t classes = 5, attrs = 6, per_class = 40, size = 32, patch = 8;
    std::uint64_t synth_seed = 7;
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--classes", classes);
    synth->add_option("--attrs", attrs);
    synth->add_option("--per-class", per_class);
    synth->add_option("--size", size);
    synth->add_option("--patch", patch);
    synth->add_option("--seed", synth_seed);

    // split
    auto* split = app.add_subcommand("split", "make a zero-shot class split");
    std::string split_ds, split_out;
    std::size_t unseen = 2;
    std::uint64_t split_seed = 1;
    split->add_option("--ds", split_ds)->required();
    split->add_option("--unseen", unseen);
    split->add_option("--seed", split_seed);
    split->add_option("--out", split_out)->required();

    // train
    auto* tr = app.add_subcommand("train", "train a model; logs per-epoch losses as TSV");
    std::string tr_ds, tr_split, tr_cfg, tr_words, tr_out;
    tr->add_option("--ds", tr_ds)->required();
    tr->add_option("--split", tr_split)->required();
    tr->add_option("--config", tr_cfg)->required();
    tr->add_option("--words", tr_words)->description("word-vector file; synthesized from the seed if omitted");
    tr->add_option("--out", tr_out)->required();

    // encode
    auto* enc = app.add_subcommand("encode", "hash a set of images into a code db");
    std::string enc_model, enc_ds, enc_split, enc_ids = "retrieval", enc_out;
    enc->add_option("--model", enc_model)->required();
    enc->add_option("--ds", enc_ds)->required();
    enc->add_option("--split", enc_split);
    enc->add_option("--ids", enc_ids)->description("train|test|retrieval|all");
    enc->add_option("--out", enc_out)->required();

    // eval
    auto* ev = app.add_subcommand("eval", "score queries against a code db");
    std::string ev_codes, ev_queries, ev_curves;
    std::size_t cutoff = 5000;
    bool self_exclude = false;
    ev->add_option("--codes", ev_codes)->required();
    ev->add_option("--queries", ev_queries)->required();
    ev->add_option("--cutoff", cutoff);
    ev->add_option("--curves", ev_curves)->description("directory for PR / P@N / R@N TSVs");
    ev->add_flag("--self-exclude", self_exclude,
                 "drop the query's own db row (positional id match)");

    // grid
    auto* gr = app.add_subcommand("grid", "alpha/beta grid search by validation mAP");
    std::string gr_ds, gr_split, gr_cfg, gr_words, gr_alphas, gr_betas;
    gr->add_option("--ds", gr_ds)->required();
    gr->add_option("--split", gr_split)->required();
    gr->add_option("--config", gr_cfg)->required();
    gr->add_option("--words", gr_words);
    gr->add_option("--alphas", gr_alphas)->required();
    gr->add_option("--betas", gr_betas)->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss");
    std::string gc_cfg;
    gc->add_option("--config", gc_cfg);

    // confusion
    auto* cf = app.add_subcommand("confusion", "class-distance confusion matrix TSV");
    std::string cf_codes, cf_out;
    cf->add_option("--codes", cf_codes)->required();
    cf->add_option("--out", cf_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed())
            return cmd_synth(synth_out, classes, attrs, per_class, size, patch, synth_seed);
        if (split->parsed()) return cmd_split(split_ds, unseen, split_seed, split_out);
        if (tr->parsed()) return cmd_train(tr_ds, tr_split, tr_cfg, tr_words, tr_out);
        if (enc->parsed()) return cmd_encode(enc_model, enc_ds, enc_split, enc_ids, enc_out);
        if (ev->parsed()) return cmd_eval(ev_codes, ev_queries, cutoff, ev_curves, self_exclude);
        if (gr->parsed()) return cmd_grid(gr_ds, gr_split, gr_cfg, gr_words, gr_alphas, gr_betas);
        if (gc->parsed()) return cmd_gradcheck(gc_cfg);
        if (cf->parsed()) return cmd_confusion(cf_codes, cf_out);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
