#include <doctest.h>

#include <cmath>

#include "handmesh/checkpoint.hpp"
#include "handmesh/conv.hpp"
#include "handmesh/optim.hpp"
#include "handmesh/params.hpp"
#include "handmesh/rng.hpp"
#include "handmesh/tensor.hpp"
#include "oracles.hpp"

using namespace handmesh;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor<double>::from_vector(std::move(data), std::move(shape), requires_grad);
}

} // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity leaves the operand unchanged") {
    auto eye = Tensor<double>::from_vector({1, 0, 0, 0, 1, 0, 0, 0, 1}, {3, 3});
    Rng rng(7);
    auto m = random_tensor({3, 4}, rng);
    auto out = matmul(eye, m);
    for (std::size_t i = 0; i < m.numel(); ++i) CHECK(out.values()[i] == doctest::Approx(m.values()[i]));
}

TEST_CASE("matmul hand-computed 2x2 by 2x1") {
    auto a = Tensor<double>::from_vector({1, 2, 3, 4}, {2, 2});
    auto b = Tensor<double>::from_vector({0, 1}, {2, 1});
    auto c = matmul(a, b);
    CHECK(c.values()[0] == doctest::Approx(2.0));
    CHECK(c.values()[1] == doctest::Approx(4.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    auto a = Tensor<double>::zeros({2, 3});
    auto b = Tensor<double>::zeros({4, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences on 5x7 * 7x3") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto a = random_tensor({5, 7}, rng, true);
        auto b = random_tensor({7, 3}, rng, true);
        auto weights = random_tensor({5, 3}, rng); // random projection to a scalar
        auto loss_fn = [&] { return sum(mul(matmul(a, b), weights)); };
        CHECK(oracles::gradient_check<double>({a, b}, loss_fn) < 1e-5);
    }
}

TEST_CASE("conv2d 1x1 with permutation kernel permutes channels") {
    Rng rng(3);
    auto x = random_tensor({3, 4, 4}, rng);
    // kernel sends channel 0->1, 1->2, 2->0
    std::vector<double> w(3 * 3, 0.0);
    w[0 * 3 + 2] = 1.0;
    w[1 * 3 + 0] = 1.0;
    w[2 * 3 + 1] = 1.0;
    auto kernel = Tensor<double>::from_vector(w, {3, 3, 1, 1});
    auto out = conv2d(x, kernel, 1, 0);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(out.values()[0 * 16 + i] == doctest::Approx(x.values()[2 * 16 + i]));
        CHECK(out.values()[1 * 16 + i] == doctest::Approx(x.values()[0 * 16 + i]));
        CHECK(out.values()[2 * 16 + i] == doctest::Approx(x.values()[1 * 16 + i]));
    }
}

TEST_CASE("conv2d 3x3 ones kernel on constant input counts the support") {
    auto x = Tensor<double>::full({1, 4, 4}, 1.0);
    auto w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
    auto out = conv2d(x, w, 1, 1);
    REQUIRE(out.shape() == Shape{1, 4, 4});
    // corners see a 2x2 window, interior the full 3x3
    CHECK(out.values()[0] == doctest::Approx(4.0));
    CHECK(out.values()[3] == doctest::Approx(4.0));
    CHECK(out.values()[12] == doctest::Approx(4.0));
    CHECK(out.values()[15] == doctest::Approx(4.0));
    CHECK(out.values()[5] == doctest::Approx(9.0));
    CHECK(out.values()[6] == doctest::Approx(9.0));
    CHECK(out.values()[1] == doctest::Approx(6.0)); // edge
}

TEST_CASE("conv2d rejects channel mismatch") {
    auto x = Tensor<double>::zeros({3, 4, 4});
    auto w = Tensor<double>::zeros({2, 4, 1, 1});
    CHECK_THROWS_AS(conv2d(x, w, 1, 0), ShapeError);
}

TEST_CASE("conv2d gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        auto x = random_tensor({2, 5, 5}, rng, true);
        auto w = random_tensor({3, 2, 3, 3}, rng, true);
        auto b = random_tensor({3}, rng, true);
        const std::size_t stride = seed % 2 ? 2 : 1;
        const std::size_t side = (5 + 2 - 3) / stride + 1;
        auto weights = random_tensor({3, side, side}, rng);
        auto loss_fn = [&] { return mean(mul(conv2d(x, w, b, stride, 1), weights)); };
        CHECK(oracles::gradient_check<double>({x, w, b}, loss_fn) < 1e-5);
    }
}

TEST_CASE("softmax of zeros is uniform") {
    auto x = Tensor<double>::zeros({4});
    auto s = softmax(x, 0);
    for (double v : s.values()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax closed form for [ln 2, 0]") {
    auto x = Tensor<double>::from_vector({std::log(2.0), 0.0}, {2});
    auto s = softmax(x, 0);
    CHECK(s.values()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and rows sum to one") {
    Rng rng(11);
    auto x = random_tensor({6, 5}, rng);
    auto shifted = add(x, Tensor<double>::full({6, 5}, 123.5));
    auto s1 = softmax(x, 1);
    auto s2 = softmax(shifted, 1);
    for (std::size_t i = 0; i < s1.numel(); ++i) {
        CHECK(s1.values()[i] == doctest::Approx(s2.values()[i]).epsilon(1e-9));
        CHECK(s1.values()[i] > 0.0);
    }
    for (std::size_t r = 0; r < 6; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < 5; ++c) row += s1.values()[r * 5 + c];
        CHECK(std::abs(row - 1.0) < 1e-6);
    }
}

TEST_CASE("softmax gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 40);
        auto x = random_tensor({3, 4}, rng, true);
        auto w = random_tensor({3, 4}, rng);
        auto loss_fn = [&] { return sum(mul(softmax(x, 1), w)); };
        CHECK(oracles::gradient_check<double>({x}, loss_fn) < 1e-5);
    }
}

TEST_CASE("elementwise basics") {
    CHECK(mse_loss(Tensor<double>::from_vector({1, 2, 3}, {3}),
                   Tensor<double>::from_vector({1, 2, 3}, {3}))
              .item() == doctest::Approx(0.0));
    CHECK(mse_loss(Tensor<double>::from_vector({1, 1}, {2}),
                   Tensor<double>::from_vector({0, 0}, {2}))
              .item() == doctest::Approx(1.0));
    auto r = relu(Tensor<double>::from_vector({-2, 3}, {2}));
    CHECK(r.values()[0] == 0.0);
    CHECK(r.values()[1] == 3.0);
    CHECK_THROWS_AS(add(Tensor<double>::zeros({2}), Tensor<double>::zeros({3})), ShapeError);
}

TEST_CASE("backward of sum gives unit gradients") {
    auto w = Tensor<double>::from_vector({1, 2, 3}, {3}, true);
    sum(w).backward();
    for (double g : w.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward hand computation through mse") {
    // loss = mse(w*x, y) with w=1, x=2, y=0 -> dL/dw = 2*2*2 = 8
    auto w = Tensor<double>::scalar(1.0, true);
    auto x = Tensor<double>::scalar(2.0);
    auto y = Tensor<double>::scalar(0.0);
    mse_loss(mul(w, x), y).backward();
    CHECK(w.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("backward rejects non-scalar roots") {
    auto w = Tensor<double>::from_vector({1, 2}, {2}, true);
    CHECK_THROWS_AS(add(w, w).backward(), ContractError);
}

TEST_CASE("fan-out accumulates: d(x+x)/dx == 2 exactly") {
    auto x = Tensor<double>::scalar(1.5, true);
    add(x, x).backward();
    CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("unused parameters keep zero gradients") {
    auto used = Tensor<double>::scalar(1.0, true);
    auto unused = Tensor<double>::scalar(1.0, true);
    scale(used, 3.0).backward();
    CHECK(used.grad()[0] == doctest::Approx(3.0));
    CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("composed network full-Jacobian check vs central differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 60);
        auto x = random_tensor({2, 6}, rng, true);
        auto w1 = random_tensor({6, 5}, rng, true);
        auto b1 = random_tensor({5}, rng, true);
        auto w2 = random_tensor({5, 3}, rng, true);
        auto target = random_tensor({2, 3}, rng);
        auto loss_fn = [&] {
            auto h = relu(add_row_vec(matmul(x, w1), b1));
            auto out = softmax(matmul(h, w2), 1);
            return mse_loss(out, target);
        };
        CHECK(oracles::gradient_check<double>({x, w1, b1, w2}, loss_fn) < 1e-4);
    }
}

TEST_CASE("shape op gradients: reshape, transpose, slice, concat, scale_by, skew") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 80);
        auto a = random_tensor({3, 4}, rng, true);
        auto b = random_tensor({2, 4}, rng, true);
        auto s = Tensor<double>::scalar(rng.uniform(0.5, 2.0), true);
        auto v3 = random_tensor({3}, rng, true);
        auto w = random_tensor({5, 4}, rng);
        auto w2 = random_tensor({3, 3}, rng);
        auto loss_fn = [&] {
            auto cat = concat<double>({a, b}, 0);                  // [5,4]
            auto t = transpose2d(slice(cat, 0, 1, 3));             // [4,3]
            auto back = reshape(t, {3, 4});
            auto term1 = sum(mul(scale_by(cat, s), w));
            auto term2 = sum(mul(skew3(v3), w2));
            return add(add(term1, term2), sum(mul(back, Tensor<double>::full({3, 4}, 0.3))));
        };
        CHECK(oracles::gradient_check<double>({a, b, s, v3}, loss_fn) < 1e-5);
    }
}

TEST_CASE("upsample and pooling gradients") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 200);
        auto x = random_tensor({2, 3, 3}, rng, true);
        auto w = random_tensor({2, 6, 6}, rng);
        auto wp = random_tensor({2}, rng);
        auto loss_fn = [&] {
            auto up = upsample2x_nearest(x);
            auto pooled = global_avg_pool(x);
            return add(sum(mul(up, w)), sum(mul(pooled, wp)));
        };
        CHECK(oracles::gradient_check<double>({x}, loss_fn) < 1e-5);
    }
}

TEST_CASE("checked mode flags non-finite results") {
    checked_mode() = true;
    auto big = Tensor<double>::full({2}, 1e308);
    CHECK_THROWS_AS(mul(big, big), NumericError);
    checked_mode() = false;
    CHECK_NOTHROW(mul(big, big));
    checked_mode() = true;
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParamSet<double> params(1);
    auto w = params.kaiming("w", {4}, 4);
    const auto before = w.values();
    Adam<double> opt(params, 0.1);
    params.zero_grad();
    opt.step();
    for (std::size_t i = 0; i < 4; ++i) CHECK(w.values()[i] == doctest::Approx(before[i]));
}

TEST_CASE("adam: one step on f(w)=w^2 moves downhill") {
    ParamSet<double> params(1);
    auto w = params.zeros("w", {1});
    w.values()[0] = 1.0;
    Adam<double> opt(params, 0.1);
    params.zero_grad();
    mul(w, w).backward();
    opt.step();
    CHECK(w.values()[0] < 1.0);
    CHECK(w.values()[0] > 0.0);
}

TEST_CASE("adam: 200 steps converge on f(w)=(w-3)^2") {
    ParamSet<double> params(1);
    auto w = params.zeros("w", {1});
    w.values()[0] = 0.0;
    Adam<double> opt(params, 0.1);
    auto target = Tensor<double>::scalar(3.0);
    for (int i = 0; i < 200; ++i) {
        params.zero_grad();
        mse_loss(w, target).backward();
        opt.step();
    }
    CHECK(std::abs(w.values()[0] - 3.0) < 1e-2);
}

TEST_CASE("determinism: same seed and op sequence give bit-identical results") {
    auto run = [] {
        Rng rng(12345);
        auto a = random_tensor({8, 8}, rng, true);
        auto b = random_tensor({8, 8}, rng, true);
        auto loss = mean(mul(softmax(matmul(a, b), 1), random_tensor({8, 8}, rng)));
        loss.backward();
        return std::pair{loss.item(), a.grad()};
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    ParamSet<float> params(99);
    auto w1 = params.kaiming("layer0.w", {7, 3}, 7);
    auto w2 = params.kaiming("layer1.b", {5}, 5);
    nlohmann::json meta;
    meta["note"] = "roundtrip";
    save_checkpoint("ckpt_test_roundtrip", params, meta);

    ParamSet<float> params2(1234); // different init, must be overwritten exactly
    auto r1 = params2.kaiming("layer0.w", {7, 3}, 7);
    auto r2 = params2.kaiming("layer1.b", {5}, 5);
    auto loaded_meta = load_checkpoint("ckpt_test_roundtrip", params2);
    CHECK(loaded_meta["note"] == "roundtrip");
    CHECK(r1.values() == w1.values());
    CHECK(r2.values() == w2.values());

    ParamSet<float> bad(0);
    bad.kaiming("layer0.w", {3, 7}, 3); // wrong shape
    bad.kaiming("layer1.b", {5}, 5);
    CHECK_THROWS_AS(load_checkpoint("ckpt_test_roundtrip", bad), IoError);
}

TEST_SUITE_END();
