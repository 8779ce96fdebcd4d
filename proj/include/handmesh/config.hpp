#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "handmesh/reconstruction.hpp"

namespace handmesh {

// Full run configuration. Defaults carry the reference training protocol
// (batch 32, 70 epochs, lr 1e-4 scaled by 0.7 every 10 epochs) at full model
// width; desk_profile() shrinks data, epochs, and widths for CI-sized runs.
struct RunConfig {
    std::uint64_t seed = 42;

    // data
    int train_samples = 2000;
    int test_samples = 500;
    double occlusion_level = 0.5;

    // model
    int image_size = 256; // feature grid is image_size / 8
    std::uint64_t model_seed = 2024;
    int backbone_channels = 256;
    int heatmap_channels = 256;
    int regressor_hidden = 256;
    bool fusion_enabled = true; // false: image-only baseline, no prior/fusion

    // kgc
    std::string kgc_variant = "gcn"; // gcn | mlp
    int kgc_depth = 4;
    std::vector<std::size_t> kgc_widths; // empty -> schedule
    double kgc_noise_sigma = 2.0;
    bool kgc_normalize_input = true;
    int kgc_cheb_order = 2;

    // cat
    std::string cat_variant = "cat"; // cat | plain_transformer
    int cat_blocks = 2;
    int cat_heads = 4;
    int cat_d_model = 256;

    // optimizer
    double lr = 1e-4;
    int batch = 32;
    int epochs = 70;
    double decay_factor = 0.7;
    int decay_every = 10;

    // loss
    LossWeights loss_weights;

    // run
    std::string precision = "f32"; // f32 | f64
    int checkpoint_every = 10;
    int eval_subset = 64; // test samples scored per epoch for the log; 0 skips

    int grid() const { return image_size / 8; }

    static RunConfig desk_profile();

    // lr schedule: scaled by decay_factor once per decay_every epochs
    double lr_at_epoch(int epoch) const;

    std::map<std::string, std::string> to_map() const;
    static RunConfig from_map(const std::map<std::string, std::string>& kv);
    void apply(const std::string& key, const std::string& value);

    std::string to_text() const;                      // key=value lines
    static RunConfig from_text(const std::string& s); // applied over defaults
    static RunConfig from_file(const std::string& path);
};

} // namespace handmesh
