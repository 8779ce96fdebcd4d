#pragma once

#include <string>
#include <vector>

#include "handmesh/conv.hpp"
#include "handmesh/hand_model.hpp"
#include "handmesh/params.hpp"
#include "handmesh/pose_prior.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

// Four-stage strided encoder: image [3, S, S] -> feature [channels, S/8, S/8].
template <typename T>
class ConvEncoder {
public:
    ConvEncoder() = default;

    ConvEncoder(ParamSet<T>& params, const std::string& name, std::size_t out_channels) {
        const std::vector<std::size_t> chans = {std::max<std::size_t>(4, out_channels / 8),
                                                std::max<std::size_t>(8, out_channels / 4),
                                                std::max<std::size_t>(8, out_channels / 2),
                                                out_channels};
        std::size_t in = 3;
        for (std::size_t s = 0; s < 4; ++s) {
            w_.push_back(params.kaiming(name + ".stage" + std::to_string(s) + ".w",
                                        {chans[s], in, 3, 3}, in * 9));
            b_.push_back(params.zeros(name + ".stage" + std::to_string(s) + ".b", {chans[s]}));
            in = chans[s];
        }
    }

    Tensor<T> forward(const Tensor<T>& image) const {
        if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2))
            throw ShapeError("encoder: image must be [3,S,S], got " + shape_str(image.shape()));
        if (image.dim(1) % 8 != 0) throw ShapeError("encoder: image side must be divisible by 8");
        Tensor<T> x = image;
        for (std::size_t s = 0; s < 4; ++s) {
            x = conv2d(x, w_[s], b_[s], s < 3 ? 2 : 1, 1);
            if (s < 3) x = relu(x);
        }
        return x;
    }

private:
    std::vector<Tensor<T>> w_, b_;
};

// Hourglass heatmap network: two strided downsamplings, a bottleneck, nearest
// upsampling with lateral skips, and a projected top-level skip from the
// input. With every decoder weight zero the output equals skip_top(input).
template <typename T>
class Hourglass {
public:
    Hourglass() = default;

    Hourglass(ParamSet<T>& params, const std::string& name, std::size_t in_channels,
              std::size_t width, std::size_t out_channels)
        : width_(width) {
        auto conv = [&](const std::string& n, std::size_t cin, std::size_t cout, std::size_t k) {
            w_.push_back(params.kaiming(name + "." + n + ".w", {cout, cin, k, k}, cin * k * k));
            b_.push_back(params.zeros(name + "." + n + ".b", {cout}));
            return w_.size() - 1;
        };
        pre_ = conv("pre", in_channels, width, 3);
        down1_ = conv("down1", width, width, 3);
        down2_ = conv("down2", width, width, 3);
        mid_ = conv("mid", width, width, 3);
        up2_ = conv("up2", width, width, 3);
        lat1_ = conv("lat1", width, width, 1);
        up1_ = conv("up1", width, width, 3);
        lat0_ = conv("lat0", width, width, 1);
        head_ = conv("head", width, out_channels, 3);
        skip_top_ = conv("skip_top", in_channels, out_channels, 1);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.ndim() != 3) throw ShapeError("hourglass: need [C,H,W]");
        if (x.dim(1) % 4 != 0 || x.dim(2) % 4 != 0)
            throw ShapeError("hourglass: spatial side must be divisible by 4");
        auto apply = [&](std::size_t i, const Tensor<T>& in, std::size_t stride, std::size_t pad) {
            return conv2d(in, w_[i], b_[i], stride, pad);
        };
        auto pre = relu(apply(pre_, x, 1, 1));
        auto d1 = relu(apply(down1_, pre, 2, 1));
        auto d2 = relu(apply(down2_, d1, 2, 1));
        auto mid = relu(apply(mid_, d2, 1, 1));
        auto u2 = relu(add(apply(up2_, upsample2x_nearest(mid), 1, 1), apply(lat1_, d1, 1, 0)));
        auto u1 = relu(add(apply(up1_, upsample2x_nearest(u2), 1, 1), apply(lat0_, pre, 1, 0)));
        return add(apply(head_, u1, 1, 1), apply(skip_top_, x, 1, 0));
    }

private:
    std::size_t width_ = 0;
    std::vector<Tensor<T>> w_, b_;
    std::size_t pre_ = 0, down1_ = 0, down2_ = 0, mid_ = 0, up2_ = 0, lat1_ = 0, up1_ = 0,
                lat0_ = 0, head_ = 0, skip_top_ = 0;
};

// Global-average-pool regressor producing the 48 pose and 10 shape scalars
// from the channel-concatenated fused feature and heatmaps.
template <typename T>
class ParamRegressor {
public:
    ParamRegressor() = default;

    ParamRegressor(ParamSet<T>& params, const std::string& name, std::size_t in_channels,
                   std::size_t hidden) {
        w1_ = params.kaiming(name + ".fc1.w", {in_channels, hidden}, in_channels);
        b1_ = params.zeros(name + ".fc1.b", {hidden});
        w2_ = params.kaiming(name + ".fc2.w", {hidden, kPoseParams + kShapeParams}, hidden);
        b2_ = params.zeros(name + ".fc2.b", {kPoseParams + kShapeParams});
    }

    // Returns (theta [48], beta [10]).
    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& fused, const Tensor<T>& heatmaps) const {
        auto pooled = reshape(global_avg_pool(concat<T>({fused, heatmaps}, 0)),
                              {std::size_t(1), w1_.dim(0)});
        auto hidden = relu(add_row_vec(matmul(pooled, w1_), b1_));
        auto out = reshape(add_row_vec(matmul(hidden, w2_), b2_),
                           {static_cast<std::size_t>(kPoseParams + kShapeParams)});
        return {slice(out, 0, 0, kPoseParams), slice(out, 0, kPoseParams, kShapeParams)};
    }

private:
    Tensor<T> w1_, b1_, w2_, b2_;
};

// Ground-truth heatmaps: one 2D Gaussian per joint (sigma in grid cells) in
// the first 21 channels, remaining channels zero.
template <typename T>
Tensor<T> render_heatmap_targets(const Pose2D& pose, int image_size, std::size_t grid,
                                 std::size_t channels, double sigma = 1.5) {
    if (channels < static_cast<std::size_t>(kHandJoints))
        throw ContractError("heatmap targets: need at least 21 channels");
    std::vector<T> data(channels * grid * grid, T(0));
    const double cell = static_cast<double>(image_size) / static_cast<double>(grid);
    for (int j = 0; j < kHandJoints; ++j) {
        const double cx = pose.joints[static_cast<std::size_t>(j)][0] / cell - 0.5;
        const double cy = pose.joints[static_cast<std::size_t>(j)][1] / cell - 0.5;
        for (std::size_t y = 0; y < grid; ++y)
            for (std::size_t x = 0; x < grid; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                data[(static_cast<std::size_t>(j) * grid + y) * grid + x] =
                    static_cast<T>(std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
            }
    }
    return Tensor<T>::from_vector(std::move(data), {channels, grid, grid});
}

template <typename T>
struct HandEstimate {
    Tensor<T> heatmaps; // [H_ch, G, G]
    Tensor<T> theta;    // [48]
    Tensor<T> beta;     // [10]
    Tensor<T> joints;   // [21, 3] mm
    Tensor<T> vertices; // [778, 3] mm
};

struct LossWeights {
    double heatmaps = 1.0;
    double theta = 1.0;
    double beta = 1.0;
    double joints = 1.0;
    double vertices = 1.0;
};

// Weighted sum of per-term mean squared errors.
template <typename T>
Tensor<T> training_loss(const HandEstimate<T>& pred, const HandEstimate<T>& target,
                        const LossWeights& w = {}) {
    auto require = [](const Tensor<T>& t, const char* name) {
        if (!t.defined()) throw ContractError(std::string("training loss: missing term ") + name);
    };
    require(pred.heatmaps, "heatmaps"); require(target.heatmaps, "heatmaps");
    require(pred.theta, "theta"); require(target.theta, "theta");
    require(pred.beta, "beta"); require(target.beta, "beta");
    require(pred.joints, "joints"); require(target.joints, "joints");
    require(pred.vertices, "vertices"); require(target.vertices, "vertices");
    auto loss = scale(mse_loss(pred.heatmaps, target.heatmaps), static_cast<T>(w.heatmaps));
    loss = add(loss, scale(mse_loss(pred.theta, target.theta), static_cast<T>(w.theta)));
    loss = add(loss, scale(mse_loss(pred.beta, target.beta), static_cast<T>(w.beta)));
    loss = add(loss, scale(mse_loss(pred.joints, target.joints), static_cast<T>(w.joints)));
    loss = add(loss, scale(mse_loss(pred.vertices, target.vertices), static_cast<T>(w.vertices)));
    return loss;
}

} // namespace handmesh
