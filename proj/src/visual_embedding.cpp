#include "razh/visual_embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace razh {

namespace {

Tensor2 gaussian(std::size_t rows, std::size_t cols, double stddev,
                 std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor2 out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}

Tensor2 fan_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
    return gaussian(rows, cols, stddev, rng);
}

} // namespace

void init_model_params(ParamStore& store, const ModelConfig& cfg,
                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t dv = cfg.d_v;
    const std::size_t m = cfg.patch_count();

    store.add("proj_w", fan_init(dv, cfg.patch_dim(), rng));
    store.add("proj_b", Tensor2(dv, 1));

    store.add("enc_pos", gaussian(dv, m, 0.02, rng));
    store.add("enc_w1", fan_init(dv, dv, rng));
    store.add("enc_b1", Tensor2(dv, 1));
    store.add("enc_mix", gaussian(dv, dv, 0.02, rng));
    store.add("enc_w2", fan_init(dv, dv, rng));
    store.add("enc_b2", Tensor2(dv, 1));

    store.add("dec_pos", gaussian(dv, m, 0.02, rng));
    store.add("dec_w1", fan_init(dv, dv, rng));
    store.add("dec_b1", Tensor2(dv, 1));
    store.add("dec_out_w", fan_init(cfg.patch_dim(), dv, rng));
    store.add("dec_out_b", Tensor2(cfg.patch_dim(), 1));

    store.add("mask_token", gaussian(dv, 1, 0.02, rng));

    store.add("fm_w", fan_init(cfg.d_a, dv, rng));
    store.add("fm_b", Tensor2(cfg.d_a, 1));
    store.add("fa_w", fan_init(cfg.d_a, cfg.word_dim, rng));
    store.add("fa_b", Tensor2(cfg.d_a, 1));
    store.add("fi_w", fan_init(dv, cfg.d_a, rng));
    store.add("fi_b", Tensor2(dv, 1));

    store.add("hash_w", fan_init(dv, cfg.code_length, rng));
    store.add("hash_b", Tensor2(cfg.code_length, 1));
    store.add("cls_w", fan_init(cfg.code_length, cfg.n_classes, rng));
    store.add("cls_b", Tensor2(cfg.n_classes, 1));
}

Var encode(Tape& tape, const ModelConfig& cfg, Var seq,
           const std::vector<std::size_t>& positions) {
    if (tape.value(seq).cols() != positions.size())
        throw config_error("encode: position count != sequence length");
    if (tape.value(seq).cols() == 0)
        throw config_error("encode: empty sequence");

    auto act = [&](Var x) { return cfg.encoder_tanh ? tape.tanh_op(x) : x; };

    Var x = tape.add(seq, tape.gather_cols(tape.param("enc_pos"), positions));
    x = act(tape.add_col(tape.matmul_op(tape.param("enc_w1"), x),
                         tape.param("enc_b1")));
    // Global mixing: mean-pooled context mapped back onto every column.
    Var context = tape.matmul_op(tape.param("enc_mix"), tape.mean_cols(x));
    x = tape.add_col(x, context);
    x = act(tape.add_col(tape.matmul_op(tape.param("enc_w2"), x),
                         tape.param("enc_b2")));
    return x;
}

Var decode(Tape& tape, const ModelConfig& cfg, Var features) {
    if (tape.value(features).cols() != cfg.patch_count())
        throw config_error("decode: expected a full-length sequence");
    auto act = [&](Var x) { return cfg.encoder_tanh ? tape.tanh_op(x) : x; };

    Var x = tape.add(features, tape.param("dec_pos"));
    x = act(tape.add_col(tape.matmul_op(tape.param("dec_w1"), x),
                         tape.param("dec_b1")));
    return tape.add_col(tape.matmul_op(tape.param("dec_out_w"), x),
                        tape.param("dec_out_b"));
}

std::vector<std::size_t> select_patches(std::size_t m, double ratio,
                                        std::mt19937_64& rng) {
    if (!(ratio > 0.0) || ratio > 1.0)
        throw config_error("select_patches: ratio must be in (0, 1]");
    const std::size_t take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m))));
    std::vector<std::size_t> all(m);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates keeps draw count independent of m - take.
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(take);
    std::sort(all.begin(), all.end());
    return all;
}

Var pad_with_mask(Tape& tape, Var encoded, const std::vector<std::size_t>& selected,
                  std::size_t total_cols) {
    return tape.scatter_cols(encoded, selected, tape.param("mask_token"), total_cols);
}

Var pool(Tape& tape, Var features) { return tape.mean_cols(features); }

} // namespace razh
