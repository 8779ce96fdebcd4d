#pragma once

#include <memory>
#include <string>

#include "handmesh/config.hpp"
#include "handmesh/cross_fusion.hpp"
#include "handmesh/hand_graph.hpp"
#include "handmesh/hand_model.hpp"
#include "handmesh/pose_prior.hpp"
#include "handmesh/reconstruction.hpp"
#include "handmesh/synth_data.hpp"

namespace handmesh {

// End-to-end reconstruction network: image encoder, pose-prior GCN,
// cross-attention fusion, hourglass heatmaps, parametric regression, and the
// skinned hand layer. With fusion disabled the encoder output feeds the
// hourglass directly (image-only baseline).
template <typename T>
class HandNet {
public:
    explicit HandNet(const RunConfig& cfg)
        : cfg_(cfg),
          graph_(build_hand_skeleton()),
          hand_(make_hand_model(cfg.model_seed)),
          params_(cfg.seed ^ 0x9E3779B97F4A7C15ULL) {
        if (cfg_.image_size % 8 != 0 || cfg_.grid() % 4 != 0)
            throw ContractError("model: image_size must make the grid divisible by 4");
        if (cfg_.heatmap_channels < kHandJoints)
            throw ContractError("model: heatmap_channels must be at least 21");
        const auto channels = static_cast<std::size_t>(cfg_.backbone_channels);
        const auto h_ch = static_cast<std::size_t>(cfg_.heatmap_channels);
        backbone_ = ConvEncoder<T>(params_, "backbone", channels);
        if (cfg_.fusion_enabled) {
            PosePriorConfig pcfg;
            pcfg.variant = cfg_.kgc_variant;
            pcfg.depth = cfg_.kgc_depth;
            pcfg.widths = cfg_.kgc_widths;
            pcfg.cheb_order = cfg_.kgc_cheb_order;
            pcfg.grid = cfg_.grid();
            pcfg.image_size = cfg_.image_size;
            pcfg.normalize_input = cfg_.kgc_normalize_input;
            pcfg.noise_sigma = cfg_.kgc_noise_sigma;
            prior_ = std::make_unique<PosePrior<T>>(params_, "kgc", graph_, pcfg);
            CrossFusionConfig fcfg;
            fcfg.variant = cfg_.cat_variant;
            fcfg.blocks = cfg_.cat_blocks;
            fcfg.heads = static_cast<std::size_t>(cfg_.cat_heads);
            fcfg.d_model = static_cast<std::size_t>(cfg_.cat_d_model);
            fcfg.grid = static_cast<std::size_t>(cfg_.grid());
            fcfg.image_channels = channels;
            fcfg.prior_channels = kHandJoints;
            if (fcfg.d_model % 4 != 0 || fcfg.d_model % fcfg.heads != 0)
                throw ContractError("model: cat.d_model must be divisible by 4 and by cat.heads");
            fusion_ = std::make_unique<CrossFusion<T>>(params_, "cat", fcfg);
        }
        hourglass_ = Hourglass<T>(params_, "hourglass", channels, channels, h_ch);
        regressor_ = ParamRegressor<T>(params_, "regressor", channels + h_ch,
                                       static_cast<std::size_t>(cfg_.regressor_hidden));
    }

    // image: [3, S, S]; pose_px: [21, 2] (ignored by the image-only baseline).
    HandEstimate<T> forward(const Tensor<T>& image, const Tensor<T>& pose_px) const {
        auto feature = backbone_.forward(image);
        Tensor<T> fused = feature;
        if (fusion_) fused = fusion_->forward(feature, prior_->forward(pose_px));
        auto heatmaps = hourglass_.forward(fused);
        auto [theta, beta] = regressor_.forward(fused, heatmaps);
        auto lbs = lbs_forward(hand_, theta, beta);
        HandEstimate<T> out;
        out.heatmaps = heatmaps;
        out.theta = theta;
        out.beta = beta;
        out.joints = lbs.joints;
        out.vertices = lbs.vertices;
        return out;
    }

    const RunConfig& config() const { return cfg_; }
    const HandModel& hand() const { return hand_; }
    const SkeletonGraph& graph() const { return graph_; }
    ParamSet<T>& params() { return params_; }
    const ParamSet<T>& params() const { return params_; }
    bool has_fusion() const { return fusion_ != nullptr; }

private:
    RunConfig cfg_;
    SkeletonGraph graph_;
    HandModel hand_;
    ParamSet<T> params_;
    ConvEncoder<T> backbone_;
    std::unique_ptr<PosePrior<T>> prior_;
    std::unique_ptr<CrossFusion<T>> fusion_;
    Hourglass<T> hourglass_;
    ParamRegressor<T> regressor_;
};

// Supervision targets for one sample, in the hand frame.
template <typename T>
HandEstimate<T> make_targets(const Sample& sample, const RunConfig& cfg) {
    HandEstimate<T> t;
    t.heatmaps = render_heatmap_targets<T>(sample.pose2d, cfg.image_size,
                                           static_cast<std::size_t>(cfg.grid()),
                                           static_cast<std::size_t>(cfg.heatmap_channels));
    std::vector<T> theta(sample.theta.size()), beta(sample.beta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = static_cast<T>(sample.theta[i]);
    for (std::size_t i = 0; i < beta.size(); ++i) beta[i] = static_cast<T>(sample.beta[i]);
    t.theta = Tensor<T>::from_vector(std::move(theta), {kPoseParams});
    t.beta = Tensor<T>::from_vector(std::move(beta), {kShapeParams});
    std::vector<T> joints(sample.joints3d.size()), mesh(sample.mesh.size());
    for (std::size_t i = 0; i < joints.size(); ++i)
        joints[i] = static_cast<T>(sample.joints3d[i] - sample.translation[i % 3]);
    for (std::size_t i = 0; i < mesh.size(); ++i)
        mesh[i] = static_cast<T>(sample.mesh[i] - sample.translation[i % 3]);
    t.joints = Tensor<T>::from_vector(std::move(joints), {kHandJoints, 3});
    t.vertices = Tensor<T>::from_vector(std::move(mesh), {kHandVertices, 3});
    return t;
}

template <typename T>
Tensor<T> image_to_tensor(const Sample& sample, int image_size) {
    std::vector<T> data(sample.image.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(sample.image[i]);
    const auto s = static_cast<std::size_t>(image_size);
    return Tensor<T>::from_vector(std::move(data), {3, s, s});
}

} // namespace handmesh
