#include <doctest.h>

#include <cmath>

#include "handmesh/cross_fusion.hpp"
#include "oracles.hpp"

using namespace handmesh;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor<double>::from_vector(std::move(data), std::move(shape), requires_grad);
}

} // namespace

TEST_SUITE_BEGIN("cross attention");

TEST_CASE("position 0 encodes as alternating sin 0 / cos 1") {
    auto table = positional_encoding_table<double>(4, 4, 8);
    for (std::size_t i = 0; i < 8; i += 2) {
        CHECK(table.values()[i] == doctest::Approx(0.0));
        CHECK(table.values()[i + 1] == doctest::Approx(1.0));
    }
}

TEST_CASE("position table is a pure function of its shape") {
    auto a = positional_encoding_table<double>(8, 8, 16);
    auto b = positional_encoding_table<double>(8, 8, 16);
    CHECK(a.values() == b.values());
    auto ref = oracles::reference_position_table(8, 8, 16);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(a.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("all grid positions receive distinct encodings") {
    const std::size_t gh = 32, gw = 32, d = 8;
    auto table = positional_encoding_table<double>(gh, gw, d);
    const auto& v = table.values();
    for (std::size_t a = 0; a < gh * gw; ++a)
        for (std::size_t b = a + 1; b < gh * gw; ++b) {
            bool same = true;
            for (std::size_t i = 0; i < d && same; ++i) same = v[a * d + i] == v[b * d + i];
            if (same) {
                CAPTURE(a);
                CAPTURE(b);
                CHECK(!same);
            }
        }
    CHECK(true);
}

TEST_CASE("encoding rejects a token-count mismatch") {
    PositionalEncoding<double> pe(32, 32, 8);
    CHECK_THROWS_AS(pe.encode(Tensor<double>::zeros({1000, 8})), ShapeError);
    CHECK_NOTHROW(pe.encode(Tensor<double>::zeros({1024, 8})));
}

TEST_CASE("single token: attention is the value row, message is q + v exactly") {
    Rng rng(5);
    auto q = random_tensor({1, 8}, rng);
    auto k = random_tensor({1, 8}, rng);
    auto v = random_tensor({1, 8}, rng);
    auto out = multi_head_attention(q, k, v, 2);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out.values()[i] == v.values()[i]);
    auto msg = add(q, out);
    for (std::size_t i = 0; i < 8; ++i) CHECK(msg.values()[i] == q.values()[i] + v.values()[i]);
}

TEST_CASE("zero keys: every query sees the uniform mean of values") {
    Rng rng(6);
    auto q = random_tensor({5, 4}, rng);
    auto k = Tensor<double>::zeros({5, 4});
    auto v = random_tensor({5, 4}, rng);
    auto out = multi_head_attention(q, k, v, 1);
    for (std::size_t c = 0; c < 4; ++c) {
        double meanv = 0.0;
        for (std::size_t r = 0; r < 5; ++r) meanv += v.values()[r * 4 + c] / 5.0;
        for (std::size_t r = 0; r < 5; ++r)
            CHECK(out.values()[r * 4 + c] == doctest::Approx(meanv).epsilon(1e-12));
    }
}

TEST_CASE("attention rows are nonnegative and sum to one") {
    Rng rng(7);
    auto q = random_tensor({16, 8}, rng);
    auto k = random_tensor({16, 8}, rng);
    for (std::size_t h = 0; h < 2; ++h) {
        auto w = attention_weights(q, k, 2, h);
        for (std::size_t r = 0; r < 16; ++r) {
            double row = 0.0;
            for (std::size_t c = 0; c < 16; ++c) {
                CHECK(w.values()[r * 16 + c] >= 0.0);
                row += w.values()[r * 16 + c];
            }
            CHECK(std::abs(row - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("cross-attention block matches the independent triple-loop oracle") {
    const std::size_t grid = 4, tokens = 16, d = 8, heads = 2;
    ParamSet<double> params(41);
    CrossAttentionBlock<double> block(params, "blk", d, heads, grid, grid);
    Rng rng(42);
    auto x_img = random_tensor({tokens, d}, rng);
    auto x_pri = random_tensor({tokens, d}, rng);
    auto [out_img, out_pri] = block.forward(x_img, x_pri);

    // oracle path: plain double loops over the same parameter values
    auto pval = [&](const std::string& n) { return params.find(n).values(); };
    const auto pe = oracles::reference_position_table(grid, grid, d);
    auto stream = [&](const char* name, const std::vector<double>& x,
                      const std::vector<double>& other) {
        const std::string base = std::string("blk.") + name;
        const std::string other_base = std::string("blk.") + (name == std::string("img") ? "prior" : "img");
        auto q = oracles::add_rows(oracles::dense_rows(x, tokens, d, pval(base + ".q.w"), pval(base + ".q.b"), d), pe);
        auto k_other = oracles::add_rows(oracles::dense_rows(other, tokens, d, pval(other_base + ".k.w"), pval(other_base + ".k.b"), d), pe);
        auto v_other = oracles::dense_rows(other, tokens, d, pval(other_base + ".v.w"), pval(other_base + ".v.b"), d);
        auto msg = oracles::add_rows(q, oracles::multi_head_brute_force(q, k_other, v_other, tokens, d, heads));
        auto y = oracles::add_rows(x, msg);
        auto hidden = oracles::dense_rows(y, tokens, d, pval(base + ".mlp1.w"), pval(base + ".mlp1.b"), 2 * d);
        for (auto& h : hidden) h = std::max(0.0, h);
        auto mlp_out = oracles::dense_rows(hidden, tokens, 2 * d, pval(base + ".mlp2.w"), pval(base + ".mlp2.b"), d);
        return oracles::add_rows(y, mlp_out);
    };
    auto expect_img = stream("img", x_img.values(), x_pri.values());
    auto expect_pri = stream("prior", x_pri.values(), x_img.values());
    for (std::size_t i = 0; i < expect_img.size(); ++i) {
        CHECK(std::abs(out_img.values()[i] - expect_img[i]) < 1e-9);
        CHECK(std::abs(out_pri.values()[i] - expect_pri[i]) < 1e-9);
    }
}

TEST_CASE("degenerate wiring: zero V and zero MLP reduce to x + q") {
    const std::size_t grid = 2, tokens = 4, d = 8;
    ParamSet<double> params(43);
    CrossAttentionBlock<double> block(params, "blk", d, 2, grid, grid);
    for (auto& [name, t] : params.entries())
        if (name.find(".v.") != std::string::npos || name.find(".mlp") != std::string::npos)
            std::fill(t.values().begin(), t.values().end(), 0.0);
    Rng rng(44);
    auto x_img = random_tensor({tokens, d}, rng);
    auto x_pri = random_tensor({tokens, d}, rng);
    auto [out_img, out_pri] = block.forward(x_img, x_pri);

    const auto pe = oracles::reference_position_table(grid, grid, d);
    auto check_stream = [&](const char* name, const Tensor<double>& x, const Tensor<double>& out) {
        const std::string base = std::string("blk.") + name;
        auto q = oracles::add_rows(oracles::dense_rows(x.values(), tokens, d, params.find(base + ".q.w").values(),
                            params.find(base + ".q.b").values(), d),
                      pe);
        for (std::size_t i = 0; i < q.size(); ++i)
            CHECK(out.values()[i] == doctest::Approx(x.values()[i] + q[i]).epsilon(1e-12));
    };
    check_stream("img", x_img, out_img);
    check_stream("prior", x_pri, out_pri);
}

TEST_CASE("token permutation consistency across streams and position table") {
    const std::size_t grid = 3, tokens = 9, d = 8;
    ParamSet<double> params(45);
    CrossAttentionBlock<double> block(params, "blk", d, 2, grid, grid);
    Rng rng(46);
    auto x_img = random_tensor({tokens, d}, rng);
    auto x_pri = random_tensor({tokens, d}, rng);
    auto [base_img, base_pri] = block.forward(x_img, x_pri);

    std::vector<std::size_t> perm = {4, 7, 0, 2, 8, 5, 1, 3, 6};
    auto permute_rows = [&](const Tensor<double>& t) {
        std::vector<double> out(t.numel());
        for (std::size_t r = 0; r < tokens; ++r)
            for (std::size_t c = 0; c < d; ++c) out[perm[r] * d + c] = t.values()[r * d + c];
        return Tensor<double>::from_vector(std::move(out), {tokens, d});
    };
    ParamSet<double> params2(45); // identical weights
    CrossAttentionBlock<double> block2(params2, "blk", d, 2, grid, grid);
    block2.set_positions(PositionalEncoding<double>(permute_rows(block.positions().table())));
    auto [perm_img, perm_pri] = block2.forward(permute_rows(x_img), permute_rows(x_pri));
    auto expect_img = permute_rows(base_img);
    auto expect_pri = permute_rows(base_pri);
    for (std::size_t i = 0; i < expect_img.numel(); ++i) {
        CHECK(perm_img.values()[i] == doctest::Approx(expect_img.values()[i]).epsilon(1e-12));
        CHECK(perm_pri.values()[i] == doctest::Approx(expect_pri.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("fusion stack: full-scale shape contract and defaults") {
    CrossFusionConfig cfg; // defaults: 2 blocks, 4 heads, d_model 256, grid 32
    CHECK(cfg.blocks == 2);
    CHECK(cfg.variant == "cat");
    ParamSet<float> params(47);
    CrossFusion<float> fusion(params, "cat", cfg);
    Rng rng(48);
    std::vector<float> img(256 * 32 * 32), pri(21 * 32 * 32);
    for (auto& v : img) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : pri) v = static_cast<float>(rng.uniform(-1, 1));
    auto out = fusion.forward(Tensor<float>::from_vector(img, {256, 32, 32}),
                              Tensor<float>::from_vector(pri, {21, 32, 32}));
    CHECK(out.shape() == Shape{256, 32, 32});
}

TEST_CASE("fusion gradients reach both input streams") {
    CrossFusionConfig cfg;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.grid = 4;
    cfg.image_channels = 6;
    cfg.prior_channels = 3;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ParamSet<double> params(seed + 60);
        CrossFusion<double> fusion(params, "cat", cfg);
        Rng rng(seed);
        auto f_img = random_tensor({6, 4, 4}, rng, true);
        auto f_pri = random_tensor({3, 4, 4}, rng, true);
        auto w = random_tensor({6, 4, 4}, rng);
        auto loss_fn = [&] { return mean(mul(fusion.forward(f_img, f_pri), w)); };
        CHECK(oracles::gradient_check<double>({f_img, f_pri}, loss_fn) < 1e-4);
    }
}

TEST_CASE("plain transformer baseline: contract, row sums, and oracle") {
    CrossFusionConfig cfg;
    cfg.variant = "plain_transformer";
    ParamSet<float> params(51);
    CrossFusion<float> fusion(params, "fuse", cfg);
    Rng rng(52);
    std::vector<float> img(256 * 32 * 32), pri(21 * 32 * 32);
    for (auto& v : img) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : pri) v = static_cast<float>(rng.uniform(-1, 1));
    auto out = fusion.forward(Tensor<float>::from_vector(img, {256, 32, 32}),
                              Tensor<float>::from_vector(pri, {21, 32, 32}));
    CHECK(out.shape() == Shape{256, 32, 32});

    // oracle equivalence for one standard self-attention block at small size
    const std::size_t grid = 4, tokens = 16, d = 8, heads = 2;
    ParamSet<double> p2(53);
    SelfAttentionBlock<double> block(p2, "self", d, heads, grid, grid);
    auto x = random_tensor({tokens, d}, rng);
    auto got = block.forward(x);
    const auto pe = oracles::reference_position_table(grid, grid, d);
    auto pv = [&](const std::string& n) { return p2.find(n).values(); };
    auto q = oracles::add_rows(oracles::dense_rows(x.values(), tokens, d, pv("self.q.w"), pv("self.q.b"), d), pe);
    auto k = oracles::add_rows(oracles::dense_rows(x.values(), tokens, d, pv("self.k.w"), pv("self.k.b"), d), pe);
    auto v = oracles::dense_rows(x.values(), tokens, d, pv("self.v.w"), pv("self.v.b"), d);
    auto y = oracles::add_rows(x.values(), oracles::multi_head_brute_force(q, k, v, tokens, d, heads));
    auto hidden = oracles::dense_rows(y, tokens, d, pv("self.mlp1.w"), pv("self.mlp1.b"), 2 * d);
    for (auto& h : hidden) h = std::max(0.0, h);
    auto expect = oracles::add_rows(y, oracles::dense_rows(hidden, tokens, 2 * d, pv("self.mlp2.w"), pv("self.mlp2.b"), d));
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(std::abs(got.values()[i] - expect[i]) < 1e-9);
}

TEST_CASE("fusion rejects bad stream shapes and block counts") {
    CrossFusionConfig cfg;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.grid = 4;
    cfg.image_channels = 6;
    cfg.prior_channels = 3;
    ParamSet<double> params(70);
    CrossFusion<double> fusion(params, "cat", cfg);
    CHECK_THROWS_AS(fusion.forward(Tensor<double>::zeros({6, 8, 8}), Tensor<double>::zeros({3, 4, 4})),
                    ShapeError);
    CrossFusionConfig bad = cfg;
    bad.blocks = 4;
    ParamSet<double> params2(71);
    CHECK_THROWS_AS(CrossFusion<double>(params2, "cat", bad), ContractError);
}

TEST_SUITE_END();
