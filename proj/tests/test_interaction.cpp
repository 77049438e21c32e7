#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "egopack/interaction.hpp"
#include "egopack/rng.hpp"

using namespace egopack;
using namespace egopack::nn;

namespace {

PrototypeBank random_bank(int rows, int dim, uint64_t seed) {
    Rng rng(seed);
    PrototypeBank bank;
    bank.task = "ar";
    bank.dim = dim;
    for (int r = 0; r < rows; ++r) {
        bank.keys.emplace_back(r, 0);
        bank.counts.push_back(1);
        for (int c = 0; c < dim; ++c) bank.values.push_back(static_cast<float>(rng.normal()));
    }
    return bank;
}

void zero_param(ParamSet& params, int idx) {
    std::fill(params[idx].value.data.begin(), params[idx].value.data.end(), 0.0);
}

void identity_param(ParamSet& params, int idx) {
    zero_param(params, idx);
    Tensor& t = params[idx].value;
    for (int i = 0; i < std::min(t.rows, t.cols); ++i) t.at(i, i) = 1.0;
}

}  // namespace

TEST_CASE("interaction layer: W_r=0, W=I, k=1, query on a bank row returns that prototype") {
    const PrototypeBank bank = random_bank(12, 5, 1);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 5, {2}, 1, 2);
    zero_param(params, layout.layers[0].w_r);
    identity_param(params, layout.layers[0].w);

    Tensor q(1, 5);
    for (int c = 0; c < 5; ++c) q.at(0, c) = bank.row_ptr(4)[c];
    Tape t(&params);
    const ValId out = interaction_layer(t, t.leaf(q), bank, layout.layers[0], 1);
    for (int c = 0; c < 5; ++c)
        CHECK(t.value(out).at(0, c) == doctest::Approx(bank.row_ptr(4)[c]).epsilon(1e-6));
}

TEST_CASE("interaction layer: all-zero weights give zero output") {
    const PrototypeBank bank = random_bank(6, 3, 3);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 3, {2}, 1, 4);
    zero_param(params, layout.layers[0].w_r);
    zero_param(params, layout.layers[0].w);
    Tensor q(1, 3, 0.7);
    Tape t(&params);
    const ValId out = interaction_layer(t, t.leaf(q), bank, layout.layers[0], 2);
    for (double v : t.value(out).data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("interaction layer: scalar hand case f=2, rows {1,3}, k=2 -> 5") {
    PrototypeBank bank;
    bank.task = "ar";
    bank.dim = 1;
    bank.keys = {{0, 0}, {1, 0}};
    bank.counts = {1, 1};
    bank.values = {1.0f, 3.0f};

    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 1, {2}, 1, 5);
    params[layout.layers[0].w_r].value.at(0, 0) = 1.0;
    params[layout.layers[0].w].value.at(0, 0) = 1.0;

    Tape t(&params);
    const ValId out = interaction_layer(t, t.leaf(Tensor(1, 1, 2.0)), bank, layout.layers[0], 2);
    CHECK(t.value(out).at(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("refine: depth 1 equals a single layer; depth 2 equals manual composition") {
    const PrototypeBank bank = random_bank(15, 4, 6);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 4, {3}, 2, 7);
    Rng rng(8);
    Tensor q(1, 4);
    for (auto& v : q.data) v = rng.normal();

    Tape t1(&params);
    const Tensor once = t1.value(refine_features(t1, t1.leaf(q), bank, layout, 1, 3));
    Tape t2(&params);
    const Tensor single = t2.value(interaction_layer(t2, t2.leaf(q), bank, layout.layers[0], 3));
    CHECK(max_abs_diff(once, single) == 0.0);

    Tape t3(&params);
    const Tensor twice = t3.value(refine_features(t3, t3.leaf(q), bank, layout, 2, 3));
    Tape t4(&params);
    const ValId l1 = interaction_layer(t4, t4.leaf(q), bank, layout.layers[0], 3);
    const Tensor manual = t4.value(interaction_layer(t4, l1, bank, layout.layers[1], 3));
    CHECK(max_abs_diff(twice, manual) == 0.0);
}

TEST_CASE("refine never mutates the bank") {
    const PrototypeBank bank = random_bank(10, 4, 9);
    const std::vector<float> before = bank.values;
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 4, {2}, 3, 10);
    Rng rng(11);
    Tensor q(2, 4);
    for (auto& v : q.data) v = rng.normal();
    Tape t(&params);
    refine_features(t, t.leaf(q), bank, layout, 3, 4);
    CHECK(bank.values == before);
    CHECK(bank.payload_crc() == crc32_bytes(before.data(), before.size() * sizeof(float)));
}

TEST_CASE("k = rows saturates the max term to the whole-bank coordinate max") {
    const PrototypeBank bank = random_bank(9, 4, 12);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 4, {2}, 1, 13);
    zero_param(params, layout.layers[0].w_r);
    identity_param(params, layout.layers[0].w);

    Tensor whole_max(1, 4, -1e300);
    for (int r = 0; r < bank.rows(); ++r)
        for (int c = 0; c < 4; ++c)
            whole_max.at(0, c) = std::max(whole_max.at(0, c), static_cast<double>(bank.row_ptr(r)[c]));

    Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor q(1, 4);
        for (auto& v : q.data) v = rng.normal();
        Tape t(&params);
        const ValId out = interaction_layer(t, t.leaf(q), bank, layout.layers[0], bank.rows());
        CHECK(max_abs_diff(t.value(out), whole_max) < 1e-6);
    }
}

TEST_CASE("fusion: zero votes keep the novel logits; sum is order invariant; dims checked") {
    ParamSet params;
    Tape t(&params);
    Tensor novel(1, 3);
    novel.at(0, 0) = 0.3;
    novel.at(0, 1) = -0.2;
    novel.at(0, 2) = 1.0;
    Tensor v1(1, 3);
    v1.at(0, 0) = 0.5;
    Tensor v2(1, 3);
    v2.at(0, 2) = -0.75;

    const ValId n = t.leaf(novel);
    const ValId zero = t.leaf(Tensor(1, 3, 0.0));
    CHECK(max_abs_diff(t.value(fuse_predictions(t, {zero}, n)), novel) == 0.0);

    const ValId a = fuse_predictions(t, {t.leaf(v1), t.leaf(v2)}, n);
    const ValId b = fuse_predictions(t, {t.leaf(v2), t.leaf(v1)}, n);
    CHECK(max_abs_diff(t.value(a), t.value(b)) == 0.0);
    CHECK(t.value(a).at(0, 0) == doctest::Approx(0.8));
    CHECK(t.value(a).at(0, 2) == doctest::Approx(0.25));

    CHECK_THROWS_AS(fuse_predictions(t, {t.leaf(Tensor(1, 2, 0.0))}, n), ShapeError);
}

TEST_CASE("fusion: one backpack task with logits v gives u + v and can flip the argmax") {
    ParamSet params;
    Tape t(&params);
    Tensor u(1, 2);
    u.at(0, 0) = 1.0;
    u.at(0, 1) = 0.5;  // novel alone picks class 0
    Tensor v(1, 2);
    v.at(0, 0) = 0.0;
    v.at(0, 1) = 2.0;  // the vote flips it to class 1
    const ValId fused = fuse_predictions(t, {t.leaf(v)}, t.leaf(u));
    CHECK(t.value(fused).at(0, 0) == doctest::Approx(1.0));
    CHECK(t.value(fused).at(0, 1) == doctest::Approx(2.5));
    CHECK(t.value(fused).at(0, 1) > t.value(fused).at(0, 0));
}

TEST_CASE("interaction stack passes grad_check with a frozen bank") {
    const PrototypeBank bank = random_bank(14, 4, 15);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 4, {3}, 2, 16);
    const int qi = params.add("query", glorot_uniform(1, 4, 17, "query"));

    const double err = grad_check(params, [&](Tape& t) {
        const ValId refined = refine_features(t, t.param(qi), bank, layout, 2, 3);
        const auto& vote = layout.votes[0];
        const ValId logits = t.add_row(t.matmul(refined, t.param(vote.w)), t.param(vote.b));
        return t.softmax_cross_entropy(logits, {1});
    });
    CHECK(err < 1e-4);
}

TEST_CASE("neighbor log records k rows per layer per query row") {
    const PrototypeBank bank = random_bank(11, 4, 18);
    ParamSet params;
    const InteractionTaskLayout layout = init_interaction_task(params, "ar", 4, {2}, 3, 19);
    Rng rng(20);
    Tensor q(2, 4);
    for (auto& v : q.data) v = rng.normal();
    NeighborLog log;
    Tape t(&params);
    refine_features(t, t.leaf(q), bank, layout, 3, 4, &log);
    CHECK(log.entries.size() == 6);  // 2 rows x 3 layers
    for (const auto& e : log.entries) CHECK(e.rows.size() == 4);
}
