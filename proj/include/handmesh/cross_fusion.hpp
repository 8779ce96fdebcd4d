#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "handmesh/conv.hpp"
#include "handmesh/params.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

// Deterministic 2D sinusoidal position table for a grid of tokens in
// row-major order. The first half of each encoding carries the row index,
// the second half the column index, each with the standard
// sin/cos-interleaved frequency ladder. d_model must be divisible by 4.
template <typename T>
Tensor<T> positional_encoding_table(std::size_t grid_h, std::size_t grid_w, std::size_t d_model) {
    if (d_model % 4 != 0) throw ContractError("positional encoding: d_model must be divisible by 4");
    const std::size_t tokens = grid_h * grid_w;
    const std::size_t half = d_model / 2;
    std::vector<T> table(tokens * d_model);
    auto fill_half = [&](std::size_t tok, std::size_t offset, double pos) {
        for (std::size_t i = 0; i < half / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(half));
            table[tok * d_model + offset + 2 * i] = static_cast<T>(std::sin(pos * freq));
            table[tok * d_model + offset + 2 * i + 1] = static_cast<T>(std::cos(pos * freq));
        }
    };
    for (std::size_t r = 0; r < grid_h; ++r)
        for (std::size_t c = 0; c < grid_w; ++c) {
            const std::size_t tok = r * grid_w + c;
            fill_half(tok, 0, static_cast<double>(r));
            fill_half(tok, half, static_cast<double>(c));
        }
    return Tensor<T>::from_vector(std::move(table), {tokens, d_model});
}

// Adds a fixed position table to a token matrix; rejects token-count mismatches.
template <typename T>
class PositionalEncoding {
public:
    PositionalEncoding() = default;
    PositionalEncoding(std::size_t grid_h, std::size_t grid_w, std::size_t d_model)
        : table_(positional_encoding_table<T>(grid_h, grid_w, d_model)) {}
    explicit PositionalEncoding(Tensor<T> table) : table_(std::move(table)) {}

    Tensor<T> encode(const Tensor<T>& x) const {
        if (x.ndim() != 2 || x.shape() != table_.shape())
            throw ShapeError("positional encoding: expected token matrix " +
                             shape_str(table_.shape()) + ", got " + shape_str(x.shape()));
        return add(x, table_);
    }

    const Tensor<T>& table() const { return table_; }

private:
    Tensor<T> table_;
};

// Multi-head scaled dot-product attention on token matrices [T, d_model].
// Heads are column blocks; the per-head dimension sets the 1/sqrt(d) scale.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t heads) {
    check_same_shape(q, k, "attention q/k");
    check_same_shape(q, v, "attention q/v");
    const std::size_t d_model = q.dim(1);
    if (heads == 0 || d_model % heads != 0)
        throw ContractError("attention: head count must divide d_model");
    const std::size_t d_head = d_model / heads;
    const T scale_factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(d_head)));
    std::vector<Tensor<T>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        auto qh = slice(q, 1, h * d_head, d_head);
        auto kh = slice(k, 1, h * d_head, d_head);
        auto vh = slice(v, 1, h * d_head, d_head);
        auto logits = scale(matmul(qh, transpose2d(kh)), scale_factor);
        auto weights = softmax(logits, 1);
        outs.push_back(matmul(weights, vh));
    }
    return heads == 1 ? outs[0] : concat(outs, 1);
}

// Attention weights for one head, exposed for row-sum checks.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads,
                            std::size_t head) {
    const std::size_t d_head = q.dim(1) / heads;
    auto qh = slice(q, 1, head * d_head, d_head);
    auto kh = slice(k, 1, head * d_head, d_head);
    const T scale_factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(d_head)));
    return softmax(scale(matmul(qh, transpose2d(kh)), scale_factor), 1);
}

struct CrossFusionConfig {
    std::string variant = "cat"; // "cat" | "plain_transformer"
    int blocks = 2;              // 1..3
    std::size_t heads = 4;
    std::size_t d_model = 256;
    std::size_t grid = 32;
    std::size_t image_channels = 256; // channels of the image stream (and of the fused output)
    std::size_t prior_channels = 21;  // channels of the pose-prior stream
};

// One bidirectional cross-attention block over two token streams at a shared
// width. Projections play the role of 1x1 convolutions on the spatial grid;
// position information is added to Q and K only. Each stream ends with a
// residual two-layer MLP.
template <typename T>
class CrossAttentionBlock {
public:
    CrossAttentionBlock() = default;

    CrossAttentionBlock(ParamSet<T>& params, const std::string& name, std::size_t d_model,
                        std::size_t heads, std::size_t grid_h, std::size_t grid_w)
        : d_model_(d_model), heads_(heads), pe_(grid_h, grid_w, d_model) {
        auto proj = [&](const std::string& p) {
            return std::pair{params.kaiming(name + "." + p + ".w", {d_model, d_model}, d_model),
                             params.zeros(name + "." + p + ".b", {d_model})};
        };
        for (int s = 0; s < 2; ++s) {
            const std::string stream = s == 0 ? "img" : "prior";
            q_[s] = proj(stream + ".q");
            k_[s] = proj(stream + ".k");
            v_[s] = proj(stream + ".v");
            mlp1_[s] = std::pair{params.kaiming(name + "." + stream + ".mlp1.w",
                                                {d_model, 2 * d_model}, d_model),
                                 params.zeros(name + "." + stream + ".mlp1.b", {2 * d_model})};
            mlp2_[s] = std::pair{params.kaiming(name + "." + stream + ".mlp2.w",
                                                {2 * d_model, d_model}, 2 * d_model),
                                 params.zeros(name + "." + stream + ".mlp2.b", {d_model})};
        }
    }

    // x_img, x_prior: [tokens, d_model]. Returns the updated pair.
    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& x_img, const Tensor<T>& x_prior) const {
        check_same_shape(x_img, x_prior, "cross attention streams");
        auto project = [&](const Tensor<T>& x, const std::pair<Tensor<T>, Tensor<T>>& p) {
            return add_row_vec(matmul(x, p.first), p.second);
        };
        auto q_img = pe_.encode(project(x_img, q_[0]));
        auto k_img = pe_.encode(project(x_img, k_[0]));
        auto v_img = project(x_img, v_[0]);
        auto q_pri = pe_.encode(project(x_prior, q_[1]));
        auto k_pri = pe_.encode(project(x_prior, k_[1]));
        auto v_pri = project(x_prior, v_[1]);

        // Messages carry a Q residual: img->prior reads the image stream with
        // prior queries, and vice versa.
        auto msg_to_prior = add(q_pri, multi_head_attention(q_pri, k_img, v_img, heads_));
        auto msg_to_img = add(q_img, multi_head_attention(q_img, k_pri, v_pri, heads_));

        auto finish = [&](const Tensor<T>& x, const Tensor<T>& msg, int s) {
            auto y = add(x, msg);
            auto hidden = relu(add_row_vec(matmul(y, mlp1_[s].first), mlp1_[s].second));
            auto out = add_row_vec(matmul(hidden, mlp2_[s].first), mlp2_[s].second);
            return add(y, out);
        };
        return {finish(x_img, msg_to_img, 0), finish(x_prior, msg_to_prior, 1)};
    }

    const PositionalEncoding<T>& positions() const { return pe_; }
    void set_positions(PositionalEncoding<T> pe) { pe_ = std::move(pe); }
    std::size_t heads() const { return heads_; }

private:
    std::size_t d_model_ = 0, heads_ = 0;
    PositionalEncoding<T> pe_;
    // index 0 = image stream, 1 = prior stream
    std::pair<Tensor<T>, Tensor<T>> q_[2], k_[2], v_[2], mlp1_[2], mlp2_[2];
};

// Standard self-attention block (baseline): y = x + MHA(q,k,v), out = y + MLP(y).
template <typename T>
class SelfAttentionBlock {
public:
    SelfAttentionBlock() = default;

    SelfAttentionBlock(ParamSet<T>& params, const std::string& name, std::size_t d_model,
                       std::size_t heads, std::size_t grid_h, std::size_t grid_w)
        : heads_(heads), pe_(grid_h, grid_w, d_model) {
        auto proj = [&](const std::string& p, std::size_t in, std::size_t out) {
            return std::pair{params.kaiming(name + "." + p + ".w", {in, out}, in),
                             params.zeros(name + "." + p + ".b", {out})};
        };
        q_ = proj("q", d_model, d_model);
        k_ = proj("k", d_model, d_model);
        v_ = proj("v", d_model, d_model);
        mlp1_ = proj("mlp1", d_model, 2 * d_model);
        mlp2_ = proj("mlp2", 2 * d_model, d_model);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto project = [&](const std::pair<Tensor<T>, Tensor<T>>& p, const Tensor<T>& in) {
            return add_row_vec(matmul(in, p.first), p.second);
        };
        auto q = pe_.encode(project(q_, x));
        auto k = pe_.encode(project(k_, x));
        auto v = project(v_, x);
        auto y = add(x, multi_head_attention(q, k, v, heads_));
        auto hidden = relu(project(mlp1_, y));
        return add(y, project(mlp2_, hidden));
    }

private:
    std::size_t heads_ = 0;
    PositionalEncoding<T> pe_;
    std::pair<Tensor<T>, Tensor<T>> q_, k_, v_, mlp1_, mlp2_;
};

// Fusion stack: entry 1x1 convs lift both spatial streams to a shared width,
// attention blocks exchange information over the grid tokens, and a final
// 1x1 conv maps the channel-concatenated streams to the fused feature.
template <typename T>
class CrossFusion {
public:
    CrossFusion() = default;

    CrossFusion(ParamSet<T>& params, const std::string& name, CrossFusionConfig cfg)
        : cfg_(cfg) {
        if (cfg_.blocks < 1 || cfg_.blocks > 3)
            throw ContractError("fusion: block count must be in 1..3");
        entry_img_w_ = params.kaiming(name + ".entry_img.w",
                                      {cfg_.d_model, cfg_.image_channels, 1, 1}, cfg_.image_channels);
        entry_img_b_ = params.zeros(name + ".entry_img.b", {cfg_.d_model});
        entry_pri_w_ = params.kaiming(name + ".entry_prior.w",
                                      {cfg_.d_model, cfg_.prior_channels, 1, 1}, cfg_.prior_channels);
        entry_pri_b_ = params.zeros(name + ".entry_prior.b", {cfg_.d_model});
        if (cfg_.variant == "cat") {
            for (int b = 0; b < cfg_.blocks; ++b)
                cat_blocks_.emplace_back(params, name + ".block" + std::to_string(b), cfg_.d_model,
                                         cfg_.heads, cfg_.grid, cfg_.grid);
        } else if (cfg_.variant == "plain_transformer") {
            for (int b = 0; b < 2; ++b)
                plain_blocks_.emplace_back(params, name + ".self" + std::to_string(b),
                                           2 * cfg_.d_model, cfg_.heads, cfg_.grid, cfg_.grid);
        } else {
            throw ContractError("fusion: unknown variant " + cfg_.variant);
        }
        fuse_w_ = params.kaiming(name + ".fuse.w",
                                 {cfg_.image_channels, 2 * cfg_.d_model, 1, 1}, 2 * cfg_.d_model);
        fuse_b_ = params.zeros(name + ".fuse.b", {cfg_.image_channels});
    }

    // f_img: [image_channels, G, G], f_prior: [prior_channels, G, G]
    // -> fused [image_channels, G, G].
    Tensor<T> forward(const Tensor<T>& f_img, const Tensor<T>& f_prior) const {
        const auto g = cfg_.grid;
        if (f_img.ndim() != 3 || f_img.dim(0) != cfg_.image_channels || f_img.dim(1) != g ||
            f_img.dim(2) != g)
            throw ShapeError("fusion: image stream must be [" + std::to_string(cfg_.image_channels) +
                             "," + std::to_string(g) + "," + std::to_string(g) + "], got " +
                             shape_str(f_img.shape()));
        if (f_prior.ndim() != 3 || f_prior.dim(0) != cfg_.prior_channels || f_prior.dim(1) != g ||
            f_prior.dim(2) != g)
            throw ShapeError("fusion: prior stream must be [" + std::to_string(cfg_.prior_channels) +
                             "," + std::to_string(g) + "," + std::to_string(g) + "], got " +
                             shape_str(f_prior.shape()));
        auto lifted_img = conv2d(f_img, entry_img_w_, entry_img_b_, 1, 0);
        auto lifted_pri = conv2d(f_prior, entry_pri_w_, entry_pri_b_, 1, 0);

        Tensor<T> out_img, out_pri;
        if (!cat_blocks_.empty()) {
            auto x_img = to_tokens(lifted_img);
            auto x_pri = to_tokens(lifted_pri);
            for (const auto& block : cat_blocks_) {
                auto next = block.forward(x_img, x_pri);
                x_img = next.first;
                x_pri = next.second;
            }
            out_img = from_tokens(x_img, cfg_.d_model);
            out_pri = from_tokens(x_pri, cfg_.d_model);
        } else {
            // channel-concatenated streams through standard self-attention
            auto x = to_tokens(concat<T>({lifted_img, lifted_pri}, 0));
            for (const auto& block : plain_blocks_) x = block.forward(x);
            auto both = from_tokens(x, 2 * cfg_.d_model);
            return conv2d(both, fuse_w_, fuse_b_, 1, 0);
        }
        auto stacked = concat<T>({out_img, out_pri}, 0);
        return conv2d(stacked, fuse_w_, fuse_b_, 1, 0);
    }

    const CrossFusionConfig& config() const { return cfg_; }
    const std::vector<CrossAttentionBlock<T>>& blocks() const { return cat_blocks_; }

private:
    Tensor<T> to_tokens(const Tensor<T>& chw) const {
        const std::size_t c = chw.dim(0), t = chw.dim(1) * chw.dim(2);
        return transpose2d(reshape(chw, {c, t}));
    }
    Tensor<T> from_tokens(const Tensor<T>& tokens, std::size_t channels) const {
        return reshape(transpose2d(tokens), {channels, cfg_.grid, cfg_.grid});
    }

    CrossFusionConfig cfg_;
    Tensor<T> entry_img_w_, entry_img_b_, entry_pri_w_, entry_pri_b_;
    Tensor<T> fuse_w_, fuse_b_;
    std::vector<CrossAttentionBlock<T>> cat_blocks_;
    std::vector<SelfAttentionBlock<T>> plain_blocks_;
};

} // namespace handmesh
