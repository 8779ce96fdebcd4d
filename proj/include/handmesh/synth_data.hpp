#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "handmesh/hand_model.hpp"
#include "handmesh/pose_prior.hpp"

namespace handmesh {

// Fixed pinhole camera; the hand frame is translated into camera coordinates
// before projection. 1 model unit = 1 mm.
struct Camera {
    double focal = 530.0;
    double center_u = 128.0;
    double center_v = 128.0;

    static Camera for_image(int image_size) {
        Camera cam;
        cam.focal = 530.0 * static_cast<double>(image_size) / 256.0;
        cam.center_u = static_cast<double>(image_size) / 2.0;
        cam.center_v = static_cast<double>(image_size) / 2.0;
        return cam;
    }
};

// u = f x/z + cu, v = f y/z + cv. Throws NumericError on nonpositive depth.
Pose2D project(const std::vector<double>& joints_cam, const Camera& cam);

// One synthetic training example. Geometry is stored twice over: joints3d and
// mesh are camera-frame (so pose2d is exactly their projection), translation
// maps the hand frame into the camera frame, so hand-frame supervision
// targets are joints3d - translation and mesh - translation.
struct Sample {
    std::vector<float> image;                 // 3*S*S, values in [0,1]
    Pose2D pose2d;                            // exact projection, no noise
    std::vector<double> theta;                // 48
    std::vector<double> beta;                 // 10
    std::vector<double> joints3d;             // 21*3 camera-frame mm
    std::vector<double> mesh;                 // 778*3 camera-frame mm
    std::vector<double> translation;          // 3, hand frame -> camera frame
    std::vector<std::uint8_t> occlusion_mask; // S*S, 1 where an occluder covers
    double occlusion_ratio = 0.0;             // covered fraction of hand pixels
};

struct DatasetConfig {
    std::uint64_t seed = 1;
    int n_samples = 100;
    double occlusion_level = 0.0; // in [0, 1]
    int image_size = 256;
    std::uint64_t model_seed = 2024;
    std::string split = "train"; // salt for the per-sample streams

    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

// Deterministic given the config; samples are independent streams derived
// from (seed, split, index) so the set is order-independent.
std::vector<Sample> generate_dataset(const DatasetConfig& cfg, const HandModel& model);

// Manifest + raw-buffer persistence (one pair of files per split).
void save_dataset(const std::string& stem, const DatasetConfig& cfg,
                  const std::vector<Sample>& samples);
struct LoadedDataset {
    DatasetConfig config;
    std::vector<Sample> samples;
};
LoadedDataset load_dataset(const std::string& stem);

// Plain PPM export for eyeballing a sample.
void write_ppm(const std::string& path, const std::vector<float>& image, int image_size);

} // namespace handmesh
