#include "handmesh/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "handmesh/checkpoint.hpp"
#include "handmesh/rng.hpp"

namespace handmesh {

namespace {

// per-finger stroke colors, wrist-to-MCP bones reuse the finger color
const double kFingerColors[5][3] = {
    {0.95, 0.55, 0.40}, {0.45, 0.85, 0.50}, {0.45, 0.60, 0.95},
    {0.90, 0.80, 0.40}, {0.80, 0.50, 0.90},
};

struct RenderTarget {
    int size = 0;
    std::vector<float>* image = nullptr;
    std::vector<std::uint8_t>* hand_mask = nullptr;

    void splat(int u, int v, double intensity, const double color[3]) {
        if (u < 0 || v < 0 || u >= size || v >= size || intensity <= 0.0) return;
        const std::size_t px = static_cast<std::size_t>(v) * size + u;
        for (int c = 0; c < 3; ++c) {
            auto& dst = (*image)[static_cast<std::size_t>(c) * size * size + px];
            dst = static_cast<float>(std::min(1.0, dst + intensity * color[c]));
        }
        if (intensity > 0.15) (*hand_mask)[px] = 1;
    }
};

void draw_segment(RenderTarget& rt, double u0, double v0, double u1, double v1, double radius,
                  const double color[3]) {
    const int lo_u = static_cast<int>(std::floor(std::min(u0, u1) - radius - 1));
    const int hi_u = static_cast<int>(std::ceil(std::max(u0, u1) + radius + 1));
    const int lo_v = static_cast<int>(std::floor(std::min(v0, v1) - radius - 1));
    const int hi_v = static_cast<int>(std::ceil(std::max(v0, v1) + radius + 1));
    const double du = u1 - u0, dv = v1 - v0;
    const double len2 = du * du + dv * dv;
    for (int v = lo_v; v <= hi_v; ++v)
        for (int u = lo_u; u <= hi_u; ++u) {
            const double pu = u + 0.5, pv = v + 0.5;
            double t = len2 > 0.0 ? ((pu - u0) * du + (pv - v0) * dv) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = pu - (u0 + t * du);
            const double dy = pv - (v0 + t * dv);
            const double d = std::sqrt(dx * dx + dy * dy);
            rt.splat(u, v, std::clamp(1.2 - d / std::max(radius, 0.5), 0.0, 1.0), color);
        }
}

void draw_blob(RenderTarget& rt, double cu, double cv, double radius, const double color[3]) {
    const int lo_u = static_cast<int>(std::floor(cu - 3 * radius));
    const int hi_u = static_cast<int>(std::ceil(cu + 3 * radius));
    const int lo_v = static_cast<int>(std::floor(cv - 3 * radius));
    const int hi_v = static_cast<int>(std::ceil(cv + 3 * radius));
    for (int v = lo_v; v <= hi_v; ++v)
        for (int u = lo_u; u <= hi_u; ++u) {
            const double dx = u + 0.5 - cu, dy = v + 0.5 - cv;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
            rt.splat(u, v, g, color);
        }
}

int finger_of_joint(int j) { return j == 0 ? -1 : (j - 1) / 4; }

} // namespace

Pose2D project(const std::vector<double>& joints_cam, const Camera& cam) {
    if (joints_cam.size() != kHandJoints * 3) throw ShapeError("project: need 21x3 joints");
    Pose2D pose;
    for (int j = 0; j < kHandJoints; ++j) {
        const double x = joints_cam[static_cast<std::size_t>(3 * j)];
        const double y = joints_cam[static_cast<std::size_t>(3 * j + 1)];
        const double z = joints_cam[static_cast<std::size_t>(3 * j + 2)];
        if (z <= 0.0) throw NumericError("project: joint behind the camera");
        pose.joints[static_cast<std::size_t>(j)][0] = cam.focal * x / z + cam.center_u;
        pose.joints[static_cast<std::size_t>(j)][1] = cam.focal * y / z + cam.center_v;
    }
    return pose;
}

nlohmann::json DatasetConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["n_samples"] = n_samples;
    j["occlusion_level"] = occlusion_level;
    j["image_size"] = image_size;
    j["model_seed"] = model_seed;
    j["split"] = split;
    return j;
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
    DatasetConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.n_samples = j.at("n_samples").get<int>();
    cfg.occlusion_level = j.at("occlusion_level").get<double>();
    cfg.image_size = j.at("image_size").get<int>();
    cfg.model_seed = j.at("model_seed").get<std::uint64_t>();
    cfg.split = j.at("split").get<std::string>();
    return cfg;
}

namespace {

std::uint64_t split_salt(const std::string& split) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : split) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
    return h;
}

Sample generate_sample(const DatasetConfig& cfg, const HandModel& model, const Camera& cam,
                       Rng rng) {
    const int size = cfg.image_size;
    Sample sample;
    sample.image.assign(static_cast<std::size_t>(3) * size * size, 0.0f);

    // pose/shape draw with in-frame rejection
    std::vector<double> joints_hand, mesh_hand;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 100) throw NumericError("dataset: could not place a hand in frame");
        std::vector<double> theta(kPoseParams, 0.0);
        // root: axis uniform on the sphere, angle uniform in [0, pi/2]
        double ax = rng.gaussian(), ay = rng.gaussian(), az = rng.gaussian();
        const double an = std::sqrt(ax * ax + ay * ay + az * az);
        const double angle = rng.uniform(0.0, 1.57079632679489662);
        theta[0] = ax / an * angle;
        theta[1] = ay / an * angle;
        theta[2] = az / an * angle;
        for (int t = 3; t < kPoseParams; ++t) theta[static_cast<std::size_t>(t)] = rng.uniform(-0.6, 0.6);
        std::vector<double> beta(kShapeParams);
        for (auto& b : beta) b = rng.uniform(-1.0, 1.0);

        auto lbs = lbs_forward<double>(model, Tensor<double>::from_vector(theta, {kPoseParams}),
                                       Tensor<double>::from_vector(beta, {kShapeParams}));
        // translate the joint centroid to a jittered spot in front of the camera
        double cx = 0, cy = 0, cz = 0;
        for (int j = 0; j < kHandJoints; ++j) {
            cx += lbs.joints.values()[static_cast<std::size_t>(3 * j)] / kHandJoints;
            cy += lbs.joints.values()[static_cast<std::size_t>(3 * j + 1)] / kHandJoints;
            cz += lbs.joints.values()[static_cast<std::size_t>(3 * j + 2)] / kHandJoints;
        }
        const double tx = rng.uniform(-25.0, 25.0) - cx;
        const double ty = rng.uniform(-25.0, 25.0) - cy;
        const double tz = rng.uniform(550.0, 680.0) - cz;

        joints_hand = lbs.joints.values();
        mesh_hand = lbs.vertices.values();
        sample.theta = theta;
        sample.beta = beta;
        sample.translation = {tx, ty, tz};
        sample.joints3d.resize(joints_hand.size());
        sample.mesh.resize(mesh_hand.size());
        const double t3[3] = {tx, ty, tz};
        for (std::size_t i = 0; i < joints_hand.size(); ++i)
            sample.joints3d[i] = joints_hand[i] + t3[i % 3];
        for (std::size_t i = 0; i < mesh_hand.size(); ++i)
            sample.mesh[i] = mesh_hand[i] + t3[i % 3];

        auto pose = project(sample.joints3d, cam);
        bool in_frame = true;
        const double margin = 4.0;
        for (const auto& j : pose.joints)
            in_frame = in_frame && j[0] >= margin && j[0] <= size - margin && j[1] >= margin &&
                       j[1] <= size - margin;
        if (in_frame) {
            sample.pose2d = pose;
            break;
        }
    }

    // background: soft deterministic noise
    for (auto& v : sample.image) v = static_cast<float>(0.12 + rng.uniform(-0.05, 0.05));

    // hand rendering: bones as strokes, joints as blobs
    std::vector<std::uint8_t> hand_mask(static_cast<std::size_t>(size) * size, 0);
    RenderTarget rt{size, &sample.image, &hand_mask};
    const double px_per_mm = cam.focal / sample.translation[2];
    for (const auto& [a, b] : hand_skeleton_edges()) {
        const auto& pa = sample.pose2d.joints[static_cast<std::size_t>(a)];
        const auto& pb = sample.pose2d.joints[static_cast<std::size_t>(b)];
        const double radius = std::max(1.0, (b % 4 == 1 ? 9.0 : 6.5) * px_per_mm);
        draw_segment(rt, pa[0], pa[1], pb[0], pb[1], radius,
                     kFingerColors[finger_of_joint(b)]);
    }
    const double blob_color[3] = {0.9, 0.9, 0.9};
    for (int j = 0; j < kHandJoints; ++j)
        draw_blob(rt, sample.pose2d.joints[static_cast<std::size_t>(j)][0],
                  sample.pose2d.joints[static_cast<std::size_t>(j)][1],
                  std::max(1.0, 3.0 * px_per_mm), blob_color);

    // occluders: up to three gray rectangles seeded on hand pixels until the
    // requested fraction of hand pixels is covered
    sample.occlusion_mask.assign(static_cast<std::size_t>(size) * size, 0);
    std::size_t hand_count = 0;
    for (auto m : hand_mask) hand_count += m;
    if (cfg.occlusion_level > 0.0 && hand_count > 0) {
        std::vector<std::size_t> hand_pixels;
        hand_pixels.reserve(hand_count);
        for (std::size_t i = 0; i < hand_mask.size(); ++i)
            if (hand_mask[i]) hand_pixels.push_back(i);
        std::size_t covered = 0;
        for (int rect = 0; rect < 3; ++rect) {
            const double ratio = static_cast<double>(covered) / static_cast<double>(hand_count);
            if (ratio >= cfg.occlusion_level) break;
            const double remaining = cfg.occlusion_level - ratio;
            const std::size_t anchor =
                hand_pixels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(hand_pixels.size()) - 1))];
            const int au = static_cast<int>(anchor % static_cast<std::size_t>(size));
            const int av = static_cast<int>(anchor / static_cast<std::size_t>(size));
            const double side = std::sqrt(remaining * static_cast<double>(hand_count)) *
                                rng.uniform(1.0, 1.5);
            const double aspect = rng.uniform(0.6, 1.6);
            const int half_w = std::max(2, static_cast<int>(side * aspect / 2.0));
            const int half_h = std::max(2, static_cast<int>(side / aspect / 2.0));
            const float gray = static_cast<float>(rng.uniform(0.3, 0.7));
            for (int v = std::max(0, av - half_h); v <= std::min(size - 1, av + half_h); ++v)
                for (int u = std::max(0, au - half_w); u <= std::min(size - 1, au + half_w); ++u) {
                    const std::size_t px = static_cast<std::size_t>(v) * size + u;
                    if (!sample.occlusion_mask[px] && hand_mask[px]) ++covered;
                    sample.occlusion_mask[px] = 1;
                    for (int c = 0; c < 3; ++c)
                        sample.image[static_cast<std::size_t>(c) * size * size + px] = gray;
                }
        }
        sample.occlusion_ratio = static_cast<double>(covered) / static_cast<double>(hand_count);
    }
    return sample;
}

} // namespace

std::vector<Sample> generate_dataset(const DatasetConfig& cfg, const HandModel& model) {
    if (cfg.n_samples < 1) throw ContractError("dataset: n_samples must be >= 1");
    if (cfg.occlusion_level < 0.0 || cfg.occlusion_level > 1.0)
        throw ContractError("dataset: occlusion_level must lie in [0, 1]");
    if (cfg.image_size < 16 || cfg.image_size % 8 != 0)
        throw ContractError("dataset: image_size must be a multiple of 8, at least 16");
    const Camera cam = Camera::for_image(cfg.image_size);
    const std::uint64_t salt = split_salt(cfg.split);
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.n_samples));
    for (int i = 0; i < cfg.n_samples; ++i)
        samples.push_back(generate_sample(cfg, model, cam,
                                          Rng::derive(cfg.seed ^ salt, static_cast<std::uint64_t>(i))));
    return samples;
}

void save_dataset(const std::string& stem, const DatasetConfig& cfg,
                  const std::vector<Sample>& samples) {
    BufferWriter buffers;
    const auto size = static_cast<std::size_t>(cfg.image_size);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string p = "sample" + std::to_string(i) + ".";
        buffers.add(p + "image", {3, size, size}, s.image);
        std::vector<double> pose(kHandJoints * 2);
        for (int j = 0; j < kHandJoints; ++j) {
            pose[static_cast<std::size_t>(2 * j)] = s.pose2d.joints[static_cast<std::size_t>(j)][0];
            pose[static_cast<std::size_t>(2 * j) + 1] = s.pose2d.joints[static_cast<std::size_t>(j)][1];
        }
        buffers.add(p + "pose2d", {kHandJoints, 2}, pose);
        buffers.add(p + "theta", {kPoseParams}, s.theta);
        buffers.add(p + "beta", {kShapeParams}, s.beta);
        buffers.add(p + "joints3d", {kHandJoints, 3}, s.joints3d);
        buffers.add(p + "mesh", {kHandVertices, 3}, s.mesh);
        buffers.add(p + "translation", {3}, s.translation);
        buffers.add(p + "occlusion_mask", {size, size}, s.occlusion_mask);
        buffers.add(p + "occlusion_ratio", {1}, std::vector<double>{s.occlusion_ratio});
    }
    nlohmann::json meta;
    meta["kind"] = "dataset";
    meta["config"] = cfg.to_json();
    meta["count"] = samples.size();
    save_manifest(stem, buffers, meta);
}

LoadedDataset load_dataset(const std::string& stem) {
    auto loaded = load_manifest(stem);
    if (loaded.meta.value("kind", "") != "dataset") throw IoError("manifest is not a dataset: " + stem);
    LoadedDataset out;
    out.config = DatasetConfig::from_json(loaded.meta.at("config"));
    const auto n = loaded.meta.at("count").get<std::size_t>();
    const auto size = static_cast<std::size_t>(out.config.image_size);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string p = "sample" + std::to_string(i) + ".";
        Sample s;
        s.image = loaded.buffers.read<float>(p + "image");
        auto pose = loaded.buffers.read<double>(p + "pose2d");
        for (int j = 0; j < kHandJoints; ++j) {
            s.pose2d.joints[static_cast<std::size_t>(j)][0] = pose[static_cast<std::size_t>(2 * j)];
            s.pose2d.joints[static_cast<std::size_t>(j)][1] = pose[static_cast<std::size_t>(2 * j) + 1];
        }
        s.theta = loaded.buffers.read<double>(p + "theta");
        s.beta = loaded.buffers.read<double>(p + "beta");
        s.joints3d = loaded.buffers.read<double>(p + "joints3d");
        s.mesh = loaded.buffers.read<double>(p + "mesh");
        s.translation = loaded.buffers.read<double>(p + "translation");
        s.occlusion_mask = loaded.buffers.read<std::uint8_t>(p + "occlusion_mask");
        s.occlusion_ratio = loaded.buffers.read<double>(p + "occlusion_ratio")[0];
        if (s.image.size() != 3 * size * size) throw IoError("dataset: image size mismatch");
        out.samples.push_back(std::move(s));
    }
    return out;
}

void write_ppm(const std::string& path, const std::vector<float>& image, int image_size) {
    const auto size = static_cast<std::size_t>(image_size);
    if (image.size() != 3 * size * size) throw ShapeError("ppm: image must be 3*S*S");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P6\n" << image_size << " " << image_size << "\n255\n";
    for (std::size_t px = 0; px < size * size; ++px)
        for (int c = 0; c < 3; ++c) {
            const float v = image[static_cast<std::size_t>(c) * size * size + px];
            f.put(static_cast<char>(std::clamp(static_cast<int>(v * 255.0f + 0.5f), 0, 255)));
        }
    if (!f) throw IoError("write failed: " + path);
}

} // namespace handmesh
