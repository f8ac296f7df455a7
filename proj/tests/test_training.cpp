#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "razh/hash_head.hpp"
#include "razh/training.hpp"

using namespace razh;

namespace {

/// 16x16 images, 8x8 patches: M = 4, small enough to train in seconds.
TrainConfig small_train_config() {
    TrainConfig cfg;
    cfg.model.image_size = 16;
    cfg.model.patch_size = 8;
    cfg.model.d_v = 16;
    cfg.model.d_a = 8;
    cfg.model.word_dim = 8;
    cfg.model.code_length = 8;
    cfg.model.k_clusters = 2;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    cfg.seed = 21;
    return cfg;
}

struct Fixture {
    Dataset ds;
    ZeroShotSplit split;
    WordVectorTable words;
};

Fixture make_fixture(std::size_t n_classes, std::size_t n_unseen,
                     std::size_t per_class, std::uint64_t seed) {
    Fixture f;
    f.ds = synth_generate(n_classes, 4, per_class, 16, 8, seed);
    if (n_unseen == 0) {
        // Plain supervised setup: every class seen, everything trains.
        for (std::size_t c = 0; c < n_classes; ++c) f.split.seen.push_back(c);
        for (std::size_t id = 0; id < f.ds.n_samples(); ++id)
            f.split.train_ids.push_back(id);
    } else {
        f.split = make_split(f.ds, n_unseen, seed + 1);
    }
    f.words = synth_word_vectors(f.ds.attribute_names, 8, seed + 2);
    return f;
}

std::string temp_path(const char* stem) {
    return std::string("/tmp/razh_test_") + stem + "_" + std::to_string(::getpid());
}

} // namespace

TEST_CASE("adam_step: guards and first-step geometry") {
    ParamStore store;
    store.add("w", Tensor2(2, 2, {1.0, -2.0, 0.5, 3.0}));

    SUBCASE("step before any backward is a usage error") {
        CHECK_THROWS_AS(adam_step(store, 0.1, 0.9, 0.999, 1e-8), usage_error);
    }
    SUBCASE("zero gradient leaves parameters untouched") {
        store.grads_live = true; // as if a backward pass produced all-zero grads
        const Tensor2 before = store.value("w");
        adam_step(store, 0.1, 0.9, 0.999, 1e-8);
        CHECK(store.value("w") == before);
    }
    SUBCASE("first step moves by ~lr in the gradient's sign direction") {
        store.grad("w") = Tensor2(2, 2, {0.3, -0.7, 0.0, 2.0});
        store.grads_live = true;
        const Tensor2 before = store.value("w");
        adam_step(store, 0.1, 0.9, 0.999, 1e-12);
        // Bias correction makes m-hat/sqrt(v-hat) = g/|g| on step one.
        CHECK(store.value("w").at(0, 0) == doctest::Approx(before.at(0, 0) - 0.1).epsilon(1e-9));
        CHECK(store.value("w").at(0, 1) == doctest::Approx(before.at(0, 1) + 0.1).epsilon(1e-9));
        CHECK(store.value("w").at(1, 0) == before.at(1, 0));
        CHECK(store.value("w").at(1, 1) == doctest::Approx(before.at(1, 1) - 0.1).epsilon(1e-9));
    }
}

TEST_CASE("adam_step: moment recurrence under repeated identical gradients") {
    ParamStore store;
    store.add("w", Tensor2(1, 1, {5.0}));
    const double g = 0.25, b1 = 0.9, b2 = 0.999;
    for (int t = 1; t <= 20; ++t) {
        store.grad("w")[0] = g;
        store.grads_live = true;
        adam_step(store, 0.01, b1, b2, 1e-12);
        // Closed form: m_t = (1 - b1^t) g, v_t = (1 - b2^t) g^2.
        CHECK(store.entry("w").m[0] ==
              doctest::Approx((1.0 - std::pow(b1, t)) * g).epsilon(1e-12));
        CHECK(store.entry("w").v[0] ==
              doctest::Approx((1.0 - std::pow(b2, t)) * g * g).epsilon(1e-12));
    }
    // Bias-corrected ratio is g/|g| every step: 20 steps of -lr each.
    CHECK(store.value("w")[0] == doctest::Approx(5.0 - 20 * 0.01).epsilon(1e-9));
}

TEST_CASE("adam_step consumes gradients") {
    ParamStore store;
    store.add("w", Tensor2(1, 2, {1.0, 2.0}));
    Tape tape(&store);
    Var loss = tape.sum_all(tape.hadamard(tape.param("w"), tape.param("w")));
    tape.backward(loss);
    CHECK(store.grads_live);
    adam_step(store, 0.01, 0.9, 0.999, 1e-8);
    CHECK_FALSE(store.grads_live);
    for (std::size_t i = 0; i < 2; ++i) CHECK(store.grad("w")[i] == 0.0);
    CHECK_THROWS_AS(adam_step(store, 0.01, 0.9, 0.999, 1e-8), usage_error);
}

TEST_CASE("train: classifier-only run reaches high train accuracy") {
    Fixture f = make_fixture(3, 0, 10, 31);
    TrainConfig cfg = small_train_config();
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    cfg.epochs = 50;
    cfg.model.selection_ratio = 1.0; // eval encodes the full sequence
    TrainResult res = train(f.ds, f.split, f.words, cfg);

    ParamStore& store = res.checkpoint.params;
    const ModelConfig& model = res.checkpoint.config.model;
    std::size_t correct = 0;
    for (std::size_t id : f.split.train_ids) {
        const Tensor2 h = relaxed_code(f.ds, id, store, model);
        const Tensor2 probs = classify(h, store.value("cls_w"), store.value("cls_b"));
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs.at(0, c) > probs.at(0, best)) best = c;
        if (best == f.ds.labels[id]) ++correct;
    }
    const double accuracy =
        static_cast<double>(correct) / static_cast<double>(f.split.train_ids.size());
    CHECK(accuracy > 0.9);
}

TEST_CASE("train: total loss halves by epoch 30 on the default objective") {
    Fixture f = make_fixture(3, 0, 10, 32);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 30;
    TrainResult res = train(f.ds, f.split, f.words, cfg);
    REQUIRE(res.history.total.size() == 30);
    CHECK(res.history.total[29] < 0.5 * res.history.total[0]);
    // All four components are logged each epoch.
    CHECK(res.history.cls.size() == 30);
    CHECK(res.history.hash.size() == 30);
    CHECK(res.history.rec.size() == 30);
    CHECK(res.history.hal.size() == 30);
}

TEST_CASE("train: identical seeds give identical loss histories") {
    Fixture f = make_fixture(4, 1, 6, 33);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 4;
    TrainResult a = train(f.ds, f.split, f.words, cfg);
    TrainResult b = train(f.ds, f.split, f.words, cfg);
    CHECK(a.history.total == b.history.total);
    CHECK(a.history.cls == b.history.cls);
    CHECK(a.history.hash == b.history.hash);
    CHECK(a.history.rec == b.history.rec);
    CHECK(a.history.hal == b.history.hal);

    cfg.seed = 99;
    TrainResult c = train(f.ds, f.split, f.words, cfg);
    CHECK(a.history.total != c.history.total);
}

TEST_CASE("train: unseen-class ids in the train set are rejected") {
    Fixture f = make_fixture(4, 1, 6, 34);
    REQUIRE(!f.split.unseen.empty());
    // Smuggle one unseen-class image into the train ids.
    std::size_t intruder = f.ds.n_samples();
    for (std::size_t id = 0; id < f.ds.n_samples(); ++id)
        if (f.ds.labels[id] == f.split.unseen[0]) {
            intruder = id;
            break;
        }
    REQUIRE(intruder < f.ds.n_samples());
    ZeroShotSplit bad = f.split;
    bad.train_ids.push_back(intruder);

    TrainConfig cfg = small_train_config();
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(f.ds, bad, f.words, cfg), data_error);
}

TEST_CASE("train validates configuration against the data") {
    Fixture f = make_fixture(3, 0, 4, 35);
    TrainConfig cfg = small_train_config();
    SUBCASE("wrong image size") {
        cfg.model.image_size = 32;
        CHECK_THROWS_AS(train(f.ds, f.split, f.words, cfg), config_error);
    }
    SUBCASE("wrong word dimension") {
        cfg.model.word_dim = 12;
        CHECK_THROWS_AS(train(f.ds, f.split, f.words, cfg), config_error);
    }
    SUBCASE("wrong class count") {
        cfg.model.n_classes = 7;
        CHECK_THROWS_AS(train(f.ds, f.split, f.words, cfg), config_error);
    }
    SUBCASE("zero batch size") {
        cfg.batch_size = 0;
        CHECK_THROWS_AS(train(f.ds, f.split, f.words, cfg), config_error);
    }
}

TEST_CASE("checkpoint round-trip reproduces codes bit-exactly") {
    Fixture f = make_fixture(3, 1, 5, 36);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 2;
    TrainResult res = train(f.ds, f.split, f.words, cfg);

    const std::string path = temp_path("ckpt");
    save_checkpoint(path, res.checkpoint);
    Checkpoint back = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(back.epoch == res.checkpoint.epoch);
    CHECK(back.rng_state == res.checkpoint.rng_state);
    CHECK(back.config.model.code_length == cfg.model.code_length);
    CHECK(back.config.learning_rate == cfg.learning_rate);
    CHECK(back.config.alpha == cfg.alpha);
    CHECK(back.params.step_count == res.checkpoint.params.step_count);
    for (const auto& name : res.checkpoint.params.names()) {
        CHECK(back.params.value(name) == res.checkpoint.params.value(name));
        CHECK(back.params.entry(name).m == res.checkpoint.params.entry(name).m);
        CHECK(back.params.entry(name).v == res.checkpoint.params.entry(name).v);
    }

    const ModelConfig& model = res.checkpoint.config.model;
    for (std::size_t id : f.split.test_ids) {
        const Tensor2 h1 = relaxed_code(f.ds, id, res.checkpoint.params, model);
        const Tensor2 h2 = relaxed_code(f.ds, id, back.params, back.config.model);
        CHECK(h1 == h2);
        CHECK(binarize(h1) == binarize(h2));
    }
}

TEST_CASE("checkpoint loader rejects malformed files") {
    const std::string path = temp_path("badckpt");
    {
        FILE* fp = std::fopen(path.c_str(), "wb");
        REQUIRE(fp);
        std::fwrite("NOPE", 1, 4, fp);
        std::fclose(fp);
    }
    CHECK_THROWS_AS(load_checkpoint(path), data_error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/razh_ckpt"), data_error);
}

TEST_CASE("encode_db carries labels and ids for the requested images") {
    Fixture f = make_fixture(3, 1, 5, 37);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 1;
    TrainResult res = train(f.ds, f.split, f.words, cfg);
    const HashCodeDB db = encode_db(f.ds, f.split.retrieval_ids, res.checkpoint.params,
                                    res.checkpoint.config.model);
    CHECK(db.n == f.split.retrieval_ids.size());
    CHECK(db.k_bits == cfg.model.code_length);
    for (std::size_t i = 0; i < db.n; ++i) {
        CHECK(db.ids[i] == f.split.retrieval_ids[i]);
        CHECK(db.labels[i] == f.ds.labels[f.split.retrieval_ids[i]]);
    }
}

TEST_CASE("grid_search: single cell and table shape") {
    Fixture f = make_fixture(3, 1, 5, 38);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 1;

    SUBCASE("1x1 grid returns that cell") {
        const GridSearchResult r = grid_search(f.ds, f.split, f.words, {0.5}, {0.02}, cfg);
        CHECK(r.best_alpha == 0.5);
        CHECK(r.best_beta == 0.02);
        REQUIRE(r.table.size() == 1);
        CHECK(r.table[0].map >= 0.0);
        CHECK(r.table[0].map <= 1.0);
    }
    SUBCASE("2x3 grid emits six rows in alpha-major order") {
        const GridSearchResult r =
            grid_search(f.ds, f.split, f.words, {0.0, 1.0}, {0.0, 0.01, 0.1}, cfg);
        REQUIRE(r.table.size() == 6);
        CHECK(r.table[0].alpha == 0.0);
        CHECK(r.table[0].beta == 0.0);
        CHECK(r.table[3].alpha == 1.0);
        CHECK(r.table[5].beta == 0.1);
        // The winner must appear in the table.
        bool found = false;
        for (const auto& cell : r.table)
            if (cell.alpha == r.best_alpha && cell.beta == r.best_beta) found = true;
        CHECK(found);
    }
    SUBCASE("empty grids rejected") {
        CHECK_THROWS_AS(grid_search(f.ds, f.split, f.words, {}, {0.1}, cfg), config_error);
    }
}

TEST_CASE("non-finite losses abort with a diagnostic") {
    Fixture f = make_fixture(3, 0, 4, 39);
    TrainConfig cfg = small_train_config();
    cfg.epochs = 1;
    cfg.learning_rate = 1e155; // squared reconstruction error overflows
    cfg.batch_size = 4;
    try {
        train(f.ds, f.split, f.words, cfg);
        // Divergence may also surface as a tensor-validation numeric_error
        // inside the forward pass; either way it must not return normally
        // unless every loss stayed finite (possible but not at this lr).
        FAIL("expected numeric_error");
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).size() > 0);
    }
}
