#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "razh/gradcheck.hpp"
#include "razh/losses.hpp"

using namespace razh;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng,
                      double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor2 out(r, c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}

SimilarityMatrix sim_from_labels(const std::vector<std::size_t>& labels) {
    return build_similarity(labels);
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace

TEST_CASE("pair_weights: identity similarity on two samples") {
    const SimilarityMatrix s = sim_from_labels({0, 1});
    const PairWeights w = pair_weights(s);
    CHECK(w.s_p == 1.0);
    CHECK(w.s_n == 1.0);
    for (std::size_t i = 0; i < w.theta.size(); ++i) CHECK(w.theta[i] == 2.0);
}

TEST_CASE("pair_weights: three samples with labels 0,0,1") {
    const SimilarityMatrix s = sim_from_labels({0, 0, 1});
    const PairWeights w = pair_weights(s);
    CHECK(w.s_p == 2.5);
    CHECK(w.s_n == 0.5);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(w.theta.at(i, j) == (s.at(i, j) ? doctest::Approx(1.2) : doctest::Approx(6.0)));
}

TEST_CASE("pair_weights: degenerate batches zero the missing slot") {
    SUBCASE("all similar") {
        // N=3, all pairs similar: s_p = 4.5, s_n = -1.5 -> guard active.
        const PairWeights w = pair_weights(sim_from_labels({3, 3, 3}));
        CHECK(w.s_n == -1.5);
        for (std::size_t i = 0; i < w.theta.size(); ++i)
            CHECK(w.theta[i] == doctest::Approx(3.0 / 4.5).epsilon(1e-14));
    }
    SUBCASE("similarity-heavy batch zeroes the dissimilar slots") {
        // labels {0,0,0,1}: s_p = 5, s_n = -1; pairs against label 1 get 0.
        const PairWeights w = pair_weights(sim_from_labels({0, 0, 0, 1}));
        CHECK(w.s_p == 5.0);
        CHECK(w.s_n == -1.0);
        CHECK(w.theta.at(0, 3) == 0.0);
        CHECK(w.theta.at(3, 0) == 0.0);
        CHECK(w.theta.at(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
        CHECK(w.theta.at(3, 3) == doctest::Approx(0.8).epsilon(1e-14));
    }
    SUBCASE("all-dissimilar off-diagonal still has the diagonal similar") {
        // Distinct labels: diagonal is similar, so s_p = n/2 > 0.
        const PairWeights w = pair_weights(sim_from_labels({0, 1, 2, 3}));
        CHECK(w.s_p == 2.0);
        CHECK(w.s_n == 2.0);
        CHECK(w.theta.at(0, 0) == 2.0);
        CHECK(w.theta.at(0, 1) == 2.0);
    }
}

TEST_CASE("hash_loss: zero codes on an identity batch give 8 ln 2") {
    const SimilarityMatrix s = sim_from_labels({0, 1});
    const PairWeights w = pair_weights(s);
    const Tensor2 h(2, 8);
    CHECK(hash_loss(h, s, w) == doctest::Approx(8.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("hash_loss decreases as a similar pair's codes align") {
    std::mt19937_64 rng(3);
    const SimilarityMatrix s = sim_from_labels({4, 4});
    const PairWeights w = pair_weights(s);
    for (int trial = 0; trial < 10; ++trial) {
        // Equal-norm rows: with the i=j self-terms in the double sum, the
        // directional derivative along h_i - h_j is provably negative only
        // when neither row's norm shrinks toward the other's self-term.
        Tensor2 h = random_tensor(2, 6, rng);
        double n0 = 0.0, n1 = 0.0;
        for (std::size_t k = 0; k < 6; ++k) {
            n0 += h.at(0, k) * h.at(0, k);
            n1 += h.at(1, k) * h.at(1, k);
        }
        for (std::size_t k = 0; k < 6; ++k) h.at(1, k) *= std::sqrt(n0 / n1);

        const double before = hash_loss(h, s, w);
        Tensor2 closer = h;
        for (std::size_t k = 0; k < 6; ++k)
            closer.at(1, k) += 1e-4 * (h.at(0, k) - h.at(1, k));
        CHECK(hash_loss(closer, s, w) < before);

        // Same statement through the closed-form gradient.
        const Tensor2 grad = hash_loss_grad(h, s, w);
        double dd = 0.0;
        for (std::size_t k = 0; k < 6; ++k)
            dd += grad.at(1, k) * (h.at(0, k) - h.at(1, k));
        CHECK(dd < 0.0);
    }
}

TEST_CASE("hash_loss: three-way gradient agreement") {
    std::mt19937_64 rng(4);
    const SimilarityMatrix s = sim_from_labels({0, 1, 0, 2});
    const PairWeights w = pair_weights(s);
    ParamStore store;
    store.add("h", random_tensor(4, 6, rng));

    LossBuilder builder = [&](Tape& t, ParamStore&) {
        return hash_loss_op(t, t.param("h"), s, w);
    };
    CHECK(finite_diff_check(builder, store, 1e-5).max_rel_error <= 1e-6);

    store.zero_grads(); // the finite-difference harness accumulated into it
    {
        Tape tape(&store);
        Var loss = builder(tape, store);
        CHECK(tape.value(loss)[0] ==
              doctest::Approx(hash_loss(store.value("h"), s, w)).epsilon(1e-12));
        tape.backward(loss);
    }
    const Tensor2 closed = hash_loss_grad(store.value("h"), s, w);
    CHECK(max_abs_diff(closed, store.grad("h")) <= 1e-12);
}

TEST_CASE("hash_loss_grad vanishes at zero codes") {
    const SimilarityMatrix s = sim_from_labels({0, 1});
    const Tensor2 g = hash_loss_grad(Tensor2(2, 8), s, pair_weights(s));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("cls_loss: uniform prediction and perfect prediction") {
    Tensor2 y(1, 4);
    y.at(0, 2) = 1.0;
    Tensor2 uniform(1, 4, {0.25, 0.25, 0.25, 0.25});
    CHECK(cls_loss(y, uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(cls_loss(y, y) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cls_loss: three-way gradient agreement") {
    std::mt19937_64 rng(5);
    Tensor2 y(3, 4);
    y.at(0, 1) = y.at(1, 3) = y.at(2, 0) = 1.0;
    ParamStore store;
    store.add("p", random_tensor(3, 4, rng, 0.05, 1.0));

    LossBuilder builder = [&](Tape& t, ParamStore&) {
        return cls_loss_op(t, t.param("p"), y);
    };
    CHECK(finite_diff_check(builder, store, 1e-6).max_rel_error <= 1e-6);

    store.zero_grads(); // the finite-difference harness accumulated into it
    {
        Tape tape(&store);
        Var loss = builder(tape, store);
        CHECK(tape.value(loss)[0] ==
              doctest::Approx(cls_loss(y, store.value("p"))).epsilon(1e-12));
        tape.backward(loss);
    }
    CHECK(max_abs_diff(cls_loss_grad(y, store.value("p")), store.grad("p")) <= 1e-12);
}

TEST_CASE("recon_loss: exact fit and the off-by-one grid") {
    std::mt19937_64 rng(6);
    const Tensor2 raw = random_tensor(4, 2, rng);
    CHECK(recon_loss(raw, raw, raw, {0, 1}) == 0.0);

    // Both branches off by one everywhere, both patches selected:
    // 8 values squared per branch -> 8 + 8 = 16.
    Tensor2 off = raw;
    for (std::size_t i = 0; i < off.size(); ++i) off[i] += 1.0;
    CHECK(recon_loss(off, off, raw, {0, 1}) == doctest::Approx(16.0).epsilon(1e-13));
}

TEST_CASE("recon_loss: selected-set restriction and complement flag") {
    std::mt19937_64 rng(7);
    const Tensor2 raw = random_tensor(3, 4, rng);
    Tensor2 g_x = raw;
    for (std::size_t i = 0; i < 3; ++i) g_x.at(i, 2) += 2.0; // error only in column 2
    CHECK(recon_loss(raw, g_x, raw, {0, 1}) == doctest::Approx(0.0));
    CHECK(recon_loss(raw, g_x, raw, {2}) == doctest::Approx(12.0).epsilon(1e-13));
    CHECK(recon_loss(raw, g_x, raw, {0, 1}, true) == doctest::Approx(12.0).epsilon(1e-13));
    CHECK(recon_loss(raw, g_x, raw, {2, 3}, true) == doctest::Approx(0.0));
}

TEST_CASE("recon_loss: three-way gradient agreement") {
    std::mt19937_64 rng(8);
    const Tensor2 raw = random_tensor(5, 4, rng);
    const std::vector<std::size_t> selected = {1, 3};
    ParamStore store;
    store.add("g_z", random_tensor(5, 4, rng));
    store.add("g_x", random_tensor(5, 4, rng));

    LossBuilder builder = [&](Tape& t, ParamStore&) {
        return recon_loss_op(t, t.param("g_z"), t.param("g_x"), raw, selected);
    };
    CHECK(finite_diff_check(builder, store, 1e-5).max_rel_error <= 1e-6);

    store.zero_grads(); // the finite-difference harness accumulated into it
    {
        Tape tape(&store);
        Var loss = builder(tape, store);
        CHECK(tape.value(loss)[0] ==
              doctest::Approx(recon_loss(store.value("g_z"), store.value("g_x"), raw,
                                         selected))
                  .epsilon(1e-12));
        tape.backward(loss);
    }
    // Closed form: 2(g - P), over all columns for g_z, selected ones for g_x.
    const std::vector<std::size_t> all = {0, 1, 2, 3};
    CHECK(max_abs_diff(recon_loss_grad_gx(store.value("g_z"), raw, all),
                       store.grad("g_z")) <= 1e-12);
    CHECK(max_abs_diff(recon_loss_grad_gx(store.value("g_x"), raw, selected),
                       store.grad("g_x")) <= 1e-12);
}

TEST_CASE("hal_loss: zero at agreement, asymptote at large gaps") {
    std::mt19937_64 rng(9);
    const Tensor2 h = random_tensor(3, 5, rng);
    CHECK(hal_loss(h, h) == 0.0);

    Tensor2 far(2, 1, {30.0, 0.0});
    Tensor2 zero(2, 1);
    // Single differing component of size 30: (30 - ln 2)/(2*2).
    CHECK(hal_loss(far, zero) ==
          doctest::Approx((30.0 - std::log(2.0)) / 4.0).epsilon(1e-12));
}

TEST_CASE("hal_loss is positive whenever codes differ") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor2 h = random_tensor(2, 4, rng);
        Tensor2 ha = h;
        ha.at(1, 2) += 1e-6;
        CHECK(hal_loss(ha, h) > 0.0);
    }
}

TEST_CASE("hal_loss: three-way gradient agreement") {
    std::mt19937_64 rng(11);
    ParamStore store;
    store.add("ha", random_tensor(4, 6, rng));
    store.add("h", random_tensor(4, 6, rng));

    LossBuilder builder = [&](Tape& t, ParamStore&) {
        return hal_loss_op(t, t.param("ha"), t.param("h"));
    };
    CHECK(finite_diff_check(builder, store, 1e-5).max_rel_error <= 1e-6);

    store.zero_grads(); // the finite-difference harness accumulated into it
    {
        Tape tape(&store);
        Var loss = builder(tape, store);
        CHECK(tape.value(loss)[0] ==
              doctest::Approx(hal_loss(store.value("ha"), store.value("h"))).epsilon(1e-12));
        tape.backward(loss);
    }
    const Tensor2 closed = hal_loss_grad_ha(store.value("ha"), store.value("h"));
    CHECK(max_abs_diff(closed, store.grad("ha")) <= 1e-12);
    // The other side is the mirror image.
    Tensor2 negated = closed;
    for (std::size_t i = 0; i < negated.size(); ++i) negated[i] = -negated[i];
    CHECK(max_abs_diff(negated, store.grad("h")) <= 1e-12);
}

TEST_CASE("hal_loss_grad vanishes when branches agree") {
    std::mt19937_64 rng(12);
    const Tensor2 h = random_tensor(3, 4, rng);
    const Tensor2 g = hal_loss_grad_ha(h, h);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("total_loss composition and affinity") {
    SUBCASE("alpha = beta = 0 leaves the classification term") {
        CHECK(total_loss(1.5, 9.0, 4.0, {0.0, 0.0}) == 1.5);
    }
    SUBCASE("default weights") {
        const LossWeights w{1.0, 0.01};
        CHECK(total_loss(2.0, 3.0, 5.0, w) == doctest::Approx(2.0 + 3.0 + 0.05));
    }
    SUBCASE("doubling alpha adds exactly alpha * hash term") {
        const double cls = 0.7, h = 2.2, rec = 1.1, alpha = 0.8, beta = 0.2;
        CHECK(total_loss(cls, h, rec, {2 * alpha, beta}) -
                  total_loss(cls, h, rec, {alpha, beta}) ==
              doctest::Approx(alpha * h).epsilon(1e-14));
    }
    SUBCASE("affine in beta") {
        const double cls = 0.3, h = 1.0, rec = 4.0;
        const double at0 = total_loss(cls, h, rec, {1.0, 0.0});
        const double at1 = total_loss(cls, h, rec, {1.0, 1.0});
        const double at_half = total_loss(cls, h, rec, {1.0, 0.5});
        CHECK(at_half == doctest::Approx(0.5 * (at0 + at1)).epsilon(1e-14));
    }
}
