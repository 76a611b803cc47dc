#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "painter/rng.hpp"
#include "painter/tape.hpp"

using namespace painter;

namespace {

using DTensor = TensorT<double>;
using DTape = TapeT<double>;

DTensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    DTensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

// Central finite differences against the tape's reverse-mode gradients.
// build() must be a pure function of the leaf values; fd_check appends a
// fixed random weighted-sum so layout mistakes cannot cancel out.
void fd_check(std::vector<DTensor> inputs,
              const std::function<int(DTape&, const std::vector<int>&)>& build, Rng& rng,
              double eps = 1e-5, double tol = 1e-7) {
    DTensor weights;
    {
        DTape probe;
        std::vector<int> ids;
        for (const auto& t : inputs) ids.push_back(probe.leaf(t, false));
        int out = build(probe, ids);
        weights = random_tensor({static_cast<int>(probe.value(out).numel())}, rng);
    }
    auto eval = [&](const std::vector<DTensor>& ins) {
        DTape tape;
        std::vector<int> ids;
        for (const auto& t : ins) ids.push_back(tape.leaf(t, true));
        int out = build(tape, ids);
        int root = tape.value(out).numel() == 1 ? out : tape.weighted_sum(out, weights);
        return tape.value(root).data[0];
    };
    DTape tape;
    std::vector<int> ids;
    for (const auto& t : inputs) ids.push_back(tape.leaf(t, true));
    int out = build(tape, ids);
    int root = tape.value(out).numel() == 1 ? out : tape.weighted_sum(out, weights);
    tape.backward(root);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const DTensor& g = tape.grad(ids[i]);
        REQUIRE(g.numel() == inputs[i].numel());
        for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
            auto plus = inputs;
            auto minus = inputs;
            plus[i].data[j] += eps;
            minus[i].data[j] -= eps;
            double fd = (eval(plus) - eval(minus)) / (2 * eps);
            REQUIRE_THAT(g.data[j], Catch::Matchers::WithinAbs(fd, tol + 1e-5 * std::abs(fd)));
        }
    }
}

}  // namespace

TEST_CASE("linear gradients match finite differences") {
    Rng rng(1);
    fd_check({random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
             [](DTape& t, const std::vector<int>& ids) { return t.linear(ids[0], ids[1], ids[2]); },
             rng);
}

TEST_CASE("bmm and transpose gradients") {
    Rng rng(2);
    fd_check({random_tensor({2, 3, 4}, rng), random_tensor({2, 3, 5}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.bmm(t.transpose12(ids[0]), ids[1]);  // [2,4,3]x[2,3,5]
             },
             rng);
}

TEST_CASE("split/merge heads round trip and gradients") {
    Rng rng(3);
    DTensor x = random_tensor({4, 6}, rng);
    DTape tape;
    int id = tape.leaf(x, true);
    int y = tape.merge_heads(tape.split_heads(id, 3));
    CHECK(tape.value(y).data == x.data);
    fd_check({x}, [](DTape& t, const std::vector<int>& ids) { return t.split_heads(ids[0], 3); },
             rng);
}

TEST_CASE("softmax gradients") {
    Rng rng(4);
    fd_check({random_tensor({2, 3, 5}, rng, 2.0)},
             [](DTape& t, const std::vector<int>& ids) { return t.softmax_last(ids[0]); }, rng);
}

TEST_CASE("gelu scale add gradients") {
    Rng rng(5);
    fd_check({random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.add(t.gelu(ids[0]), t.scale(ids[1], 0.7));
             },
             rng);
}

TEST_CASE("layernorm gradients") {
    Rng rng(6);
    fd_check({random_tensor({4, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.layernorm(ids[0], ids[1], ids[2]);
             },
             rng, 1e-5, 1e-6);
}

TEST_CASE("mask scatter gradients") {
    Rng rng(7);
    std::vector<std::uint8_t> bitmap = {1, 0, 1, 0};
    fd_check({random_tensor({4, 3}, rng), random_tensor({3}, rng)},
             [&bitmap](DTape& t, const std::vector<int>& ids) {
                 return t.mask_scatter(ids[0], ids[1], bitmap);
             },
             rng);
}

TEST_CASE("concat and slice gradients") {
    Rng rng(8);
    fd_check({random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.concat_last({ids[0], t.slice_last(ids[1], 1, 2)});
             },
             rng);
}

TEST_CASE("patchify/unpatchify are inverse index maps") {
    Rng rng(9);
    DTensor img = random_tensor({6, 4, 3}, rng);
    DTape tape;
    int id = tape.leaf(img, true);
    int p = tape.patchify(id, 2);
    CHECK(tape.value(p).shape == std::vector<int>{6, 12});
    int back = tape.unpatchify(p, 2, 3, 2);
    CHECK(tape.value(back).data == img.data);
    fd_check({img}, [](DTape& t, const std::vector<int>& ids) { return t.patchify(ids[0], 2); },
             rng);
}

TEST_CASE("stack_rows and reshape gradients") {
    Rng rng(10);
    fd_check({random_tensor({2, 3, 3}, rng), random_tensor({1, 3, 3}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.reshape(t.stack_rows(ids[0], ids[1]), {9, 3});
             },
             rng);
}

TEST_CASE("conv3x3 gradients") {
    Rng rng(11);
    fd_check({random_tensor({4, 3, 2}, rng), random_tensor({18, 3}, rng), random_tensor({3}, rng)},
             [](DTape& t, const std::vector<int>& ids) {
                 return t.conv3x3(ids[0], ids[1], ids[2]);
             },
             rng);
}

TEST_CASE("masked loss values and gradients") {
    Rng rng(12);
    DTensor target = random_tensor({2, 2, 3}, rng, 0.5);
    std::vector<std::uint8_t> mask = {1, 0, 1, 1};
    for (LossKind kind : {LossKind::smooth_l1, LossKind::l1, LossKind::l2}) {
        fd_check({random_tensor({2, 2, 3}, rng, 0.5)},
                 [&](DTape& t, const std::vector<int>& ids) {
                     return t.masked_loss(ids[0], target, mask, 0.01, kind);
                 },
                 rng, 1e-6, 1e-6);
    }
}

TEST_CASE("masked loss: zero when prediction equals target") {
    DTensor x({2, 2, 3});
    for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] = 0.25 * static_cast<double>(i);
    DTape tape;
    int id = tape.leaf(x, true);
    int loss =
        tape.masked_loss(id, x, std::vector<std::uint8_t>{1, 1, 1, 1}, 0.01, LossKind::smooth_l1);
    CHECK(tape.value(loss).data[0] == 0.0);
}

TEST_CASE("masked loss: smooth-l1 value at the kink") {
    const double beta = 0.01;
    DTensor pred({1, 1, 3});
    DTensor target({1, 1, 3});
    pred.data = {beta, 0.0, 0.0};
    target.data = {0.0, 0.0, 0.0};
    DTape tape;
    int id = tape.leaf(pred, false);
    int loss = tape.masked_loss(id, target, std::vector<std::uint8_t>{1}, beta, LossKind::smooth_l1);
    CHECK(tape.value(loss).data[0] == Catch::Approx(0.5 * beta / 3.0));
}

TEST_CASE("masked loss ignores visible pixels") {
    Rng rng(13);
    DTensor pred = random_tensor({2, 2, 3}, rng);
    DTensor t1 = random_tensor({2, 2, 3}, rng);
    DTensor t2 = t1;
    // re-randomize an unmasked pixel of the target
    t2.data[3] = 9.0;
    t2.data[4] = -9.0;
    std::vector<std::uint8_t> mask = {1, 0, 1, 1};
    DTape tape;
    int id = tape.leaf(pred, false);
    double a = tape.value(tape.masked_loss(id, t1, mask, 0.01, LossKind::smooth_l1)).data[0];
    double b = tape.value(tape.masked_loss(id, t2, mask, 0.01, LossKind::smooth_l1)).data[0];
    CHECK(a == b);
}

TEST_CASE("masked loss rejects an empty mask") {
    DTape tape;
    int id = tape.leaf(DTensor({1, 1, 3}), true);
    CHECK_THROWS_AS(
        tape.masked_loss(id, DTensor({1, 1, 3}), std::vector<std::uint8_t>{0}, 0.01, LossKind::l1),
        error);
}

TEST_CASE("loss scaling scales gradients linearly") {
    Rng rng(14);
    DTensor pred = random_tensor({2, 2, 3}, rng);
    DTensor target = random_tensor({2, 2, 3}, rng);
    std::vector<std::uint8_t> mask = {1, 1, 0, 1};
    auto grad_with_scale = [&](double c) {
        DTape tape;
        int id = tape.leaf(pred, true);
        int loss = tape.masked_loss(id, target, mask, 0.01, LossKind::l2);
        tape.backward(tape.scale(loss, c));
        return tape.grad(id).data;
    };
    auto g1 = grad_with_scale(1.0);
    auto g3 = grad_with_scale(3.0);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3[i] == Catch::Approx(3.0 * g1[i]));
}
