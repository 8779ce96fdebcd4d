#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "handmesh/hand_graph.hpp"
#include "handmesh/params.hpp"
#include "handmesh/rng.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

// 2D hand pose, 21 joints in pixel coordinates of the square input crop.
struct Pose2D {
    std::array<std::array<double, 2>, kHandJoints> joints{};
};

// Per-coordinate Gaussian perturbation with std sigma (pixels).
inline Pose2D add_pose_noise(const Pose2D& pose, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ContractError("pose noise: sigma must be >= 0");
    Pose2D out = pose;
    for (auto& j : out.joints) {
        j[0] += sigma * rng.gaussian();
        j[1] += sigma * rng.gaussian();
    }
    return out;
}

template <typename T>
Tensor<T> pose_to_tensor(const Pose2D& pose) {
    std::vector<T> data(kHandJoints * 2);
    for (int i = 0; i < kHandJoints; ++i) {
        data[2 * i] = static_cast<T>(pose.joints[i][0]);
        data[2 * i + 1] = static_cast<T>(pose.joints[i][1]);
    }
    return Tensor<T>::from_vector(std::move(data), {kHandJoints, 2});
}

struct PosePriorConfig {
    std::string variant = "gcn"; // "gcn" | "mlp"
    int depth = 4;               // GCN layer count, 1..5
    std::vector<std::size_t> widths; // per-layer outputs; empty -> schedule below
    int cheb_order = 2;          // Chebyshev terms per layer
    int grid = 32;               // output spatial side; last width is grid*grid
    int image_size = 256;        // pixel frame of the input pose
    bool normalize_input = true; // map pixels to [-1,1] before the first layer
    std::vector<std::size_t> mlp_hidden; // empty -> schedule
    double noise_sigma = 2.0;    // train-time pose jitter, pixels
};

// Width ramp ending at grid*grid. Depth 4 follows the canonical
// 64/256/512/1024 profile at grid 32; other depths use a fixed ramp, all
// scaled by (grid^2 / 1024) with a floor of 8.
inline std::vector<std::size_t> pose_prior_width_schedule(int depth, int grid) {
    static const std::vector<std::vector<std::size_t>> ramps = {
        {1024}, {256, 1024}, {64, 256, 1024}, {64, 256, 512, 1024}, {64, 128, 256, 512, 1024}};
    if (depth < 1 || depth > 5) throw ContractError("pose prior: depth must be in 1..5");
    const double g = static_cast<double>(grid) * grid / 1024.0;
    std::vector<std::size_t> widths = ramps[static_cast<std::size_t>(depth - 1)];
    for (auto& w : widths)
        w = std::max<std::size_t>(8, static_cast<std::size_t>(std::lround(w * g)));
    widths.back() = static_cast<std::size_t>(grid) * grid;
    return widths;
}

inline std::vector<std::size_t> pose_mlp_hidden_schedule(int grid) {
    const double g = static_cast<double>(grid) * grid / 1024.0;
    auto scaled = [&](std::size_t w) {
        return std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(w * g)));
    };
    return {scaled(256), scaled(1024)};
}

// Lifts the 2D pose to a per-joint spatial prior map [21, grid, grid], either
// through stacked Chebyshev graph convolutions over the skeleton or through a
// 3-layer perceptron baseline on the flattened pose.
template <typename T>
class PosePrior {
public:
    PosePrior() = default;

    PosePrior(ParamSet<T>& params, const std::string& name, const SkeletonGraph& graph,
              PosePriorConfig cfg)
        : cfg_(std::move(cfg)) {
        if (cfg_.grid < 1) throw ContractError("pose prior: grid must be positive");
        const std::size_t out_width = static_cast<std::size_t>(cfg_.grid) * cfg_.grid;
        if (cfg_.variant == "gcn") {
            auto widths = cfg_.widths.empty() ? pose_prior_width_schedule(cfg_.depth, cfg_.grid)
                                              : cfg_.widths;
            if (widths.size() != static_cast<std::size_t>(cfg_.depth))
                throw ContractError("pose prior: widths list must match depth");
            if (widths.back() != out_width)
                throw ContractError("pose prior: last width must equal grid*grid");
            std::size_t f_in = 2;
            for (int l = 0; l < cfg_.depth; ++l) {
                layers_.emplace_back(params, name + ".gcn" + std::to_string(l), graph,
                                     cfg_.cheb_order, f_in, widths[static_cast<std::size_t>(l)]);
                f_in = widths[static_cast<std::size_t>(l)];
            }
        } else if (cfg_.variant == "mlp") {
            auto hidden = cfg_.mlp_hidden.empty() ? pose_mlp_hidden_schedule(cfg_.grid)
                                                  : cfg_.mlp_hidden;
            std::vector<std::size_t> dims = {kHandJoints * 2};
            dims.insert(dims.end(), hidden.begin(), hidden.end());
            dims.push_back(kHandJoints * out_width);
            for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
                mlp_w_.push_back(params.kaiming(name + ".mlp" + std::to_string(l) + ".w",
                                                {dims[l], dims[l + 1]}, dims[l]));
                mlp_b_.push_back(params.zeros(name + ".mlp" + std::to_string(l) + ".b",
                                              {dims[l + 1]}));
            }
        } else {
            throw ContractError("pose prior: unknown variant " + cfg_.variant);
        }
    }

    // pose_px: [21, 2] in pixels. Differentiable w.r.t. the pose and weights.
    Tensor<T> forward(const Tensor<T>& pose_px) const {
        if (pose_px.ndim() != 2 || pose_px.dim(0) != kHandJoints || pose_px.dim(1) != 2)
            throw ShapeError("pose prior: pose must be [21,2], got " + shape_str(pose_px.shape()));
        Tensor<T> x = pose_px;
        if (cfg_.normalize_input) {
            // 2 u / S - 1 maps the frame to [-1, 1).
            x = add(scale(x, T(2) / static_cast<T>(cfg_.image_size)),
                    Tensor<T>::full(x.shape(), T(-1)));
        }
        const auto grid = static_cast<std::size_t>(cfg_.grid);
        if (!layers_.empty()) {
            for (std::size_t l = 0; l < layers_.size(); ++l) {
                x = layers_[l].forward(x);
                if (l + 1 < layers_.size()) x = relu(x);
            }
            // [21, grid*grid] -> [21, grid, grid], row-major per joint
            return reshape(x, {kHandJoints, grid, grid});
        }
        x = reshape(x, {1, kHandJoints * 2});
        for (std::size_t l = 0; l < mlp_w_.size(); ++l) {
            x = add_row_vec(matmul(x, mlp_w_[l]), mlp_b_[l]);
            if (l + 1 < mlp_w_.size()) x = relu(x);
        }
        return reshape(x, {kHandJoints, grid, grid});
    }

    Tensor<T> forward(const Pose2D& pose) const { return forward(pose_to_tensor<T>(pose)); }

    const PosePriorConfig& config() const { return cfg_; }
    const std::vector<ChebGraphConv<T>>& gcn_layers() const { return layers_; }

private:
    PosePriorConfig cfg_;
    std::vector<ChebGraphConv<T>> layers_;
    std::vector<Tensor<T>> mlp_w_, mlp_b_;
};

} // namespace handmesh
