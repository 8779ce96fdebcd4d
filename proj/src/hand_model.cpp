#include "handmesh/hand_model.hpp"

#include <array>
#include <cmath>

#include "handmesh/checkpoint.hpp"
#include "handmesh/rng.hpp"

namespace handmesh {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 vsub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 vadd(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 vscale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double vdot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double vnorm(const Vec3& a) { return std::sqrt(vdot(a, a)); }
Vec3 vcross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Rest-pose joint centers in mm: right hand, palm in the x-y plane, fingers
// along +y. Order: wrist, then MCP/PIP/DIP/TIP per finger.
const std::array<Vec3, kHandJoints> kJointCenters = {{
    {0, 0, 0},
    {-30, 20, 8},  {-48, 40, 12}, {-60, 55, 14}, {-70, 68, 15},  // thumb
    {-20, 78, 0},  {-22, 112, 0}, {-23, 134, 0}, {-24, 152, 0},  // index
    {0, 82, 0},    {0, 120, 0},   {0, 145, 0},   {0, 165, 0},    // middle
    {18, 78, 0},   {20, 112, 0},  {21, 134, 0},  {22, 152, 0},   // ring
    {34, 70, 0},   {38, 97, 0},   {40, 114, 0},  {42, 128, 0},   // pinky
}};

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = vsub(b, a);
    const double len2 = vdot(ab, ab);
    double t = len2 > 0.0 ? vdot(vsub(p, a), ab) / len2 : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    return vnorm(vsub(p, vadd(a, vscale(ab, t))));
}

// Orthonormal frame perpendicular to dir.
void bone_frame(const Vec3& dir, Vec3& u, Vec3& v) {
    Vec3 up = std::abs(dir[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    u = vcross(dir, up);
    u = vscale(u, 1.0 / vnorm(u));
    v = vcross(dir, u);
    v = vscale(v, 1.0 / vnorm(v));
}

} // namespace

HandModel make_hand_model(std::uint64_t seed) {
    HandModel model;
    model.seed = seed;
    model.version = kHandModelVersion;
    model.parent.assign(kHandJoints, -1);
    for (const auto& [a, b] : hand_skeleton_edges()) model.parent[static_cast<std::size_t>(b)] = a;
    for (int f = 0; f < 5; ++f)
        for (int s = 0; s < 3; ++s) // MCP, PIP, DIP of each finger
            model.articulated.push_back(1 + 4 * f + s);
    model.articulated.insert(model.articulated.begin(), kWristJoint);

    Rng rng(seed ^ 0xA5C3F00DULL);

    // --- template mesh: vertex rings along every bone plus a palm patch ----
    // Stations per bone type: palm 7, proximal 5, middle 4, distal 3; eight
    // ring vertices per station; 20 bones -> 760 ring vertices + 18 palm.
    const std::array<int, 4> stations = {7, 5, 4, 3};
    const std::array<double, 4> radii = {11.0, 8.5, 7.0, 5.5};
    model.template_vertices.reserve(kHandVertices * 3);
    auto push_vertex = [&](const Vec3& p) {
        // sub-mm jitter breaks ring symmetry so regressors are well-conditioned
        model.template_vertices.push_back(p[0] + rng.uniform(-0.4, 0.4));
        model.template_vertices.push_back(p[1] + rng.uniform(-0.4, 0.4));
        model.template_vertices.push_back(p[2] + rng.uniform(-0.4, 0.4));
    };
    for (const auto& [a, b] : hand_skeleton_edges()) {
        const Vec3 pa = kJointCenters[static_cast<std::size_t>(a)];
        const Vec3 pb = kJointCenters[static_cast<std::size_t>(b)];
        const int seg_type = b % 4 == 1 ? 0 : (b % 4 == 2 ? 1 : (b % 4 == 3 ? 2 : 3));
        Vec3 dir = vsub(pb, pa);
        dir = vscale(dir, 1.0 / vnorm(dir));
        Vec3 u, v;
        bone_frame(dir, u, v);
        const int n = stations[static_cast<std::size_t>(seg_type)];
        for (int s = 0; s < n; ++s) {
            const double t = (s + 0.5) / n;
            const Vec3 center = vadd(pa, vscale(vsub(pb, pa), t));
            const double r = radii[static_cast<std::size_t>(seg_type)] * (1.0 - 0.25 * t);
            for (int k = 0; k < 8; ++k) {
                const double phi = 2.0 * 3.14159265358979323846 * k / 8.0;
                push_vertex(vadd(center, vadd(vscale(u, r * std::cos(phi)),
                                              vscale(v, r * std::sin(phi)))));
            }
        }
    }
    // palm patch: two elliptical layers of nine vertices
    for (int layer = 0; layer < 2; ++layer) {
        const double z = layer == 0 ? 10.0 : -10.0;
        for (int k = 0; k < 9; ++k) {
            const double phi = 2.0 * 3.14159265358979323846 * k / 9.0;
            push_vertex({30.0 * std::cos(phi), 40.0 + 32.0 * std::sin(phi), z});
        }
    }
    if (model.template_vertices.size() != kHandVertices * 3)
        throw ContractError("hand model: template vertex count mismatch");

    // --- smooth random shape basis, a few mm per unit coefficient ----------
    model.shape_basis.assign(kShapeParams * kHandVertices * 3, 0.0);
    const double span = 170.0; // rough hand extent, for wave normalization
    for (int b = 0; b < kShapeParams; ++b) {
        const Vec3 wave = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double phase = rng.uniform(0.0, 6.28318530717958648);
        const Vec3 dir = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
        const double dn = vnorm(dir);
        const Vec3 dirn = vscale(dir, 1.0 / (dn > 1e-12 ? dn : 1.0));
        const double amp = rng.uniform(1.0, 3.0);
        const double radial = b == 0 ? 0.03 : rng.uniform(-0.01, 0.01); // basis 0 mostly resizes
        for (int v = 0; v < kHandVertices; ++v) {
            const Vec3 p = {model.template_vertices[3 * v], model.template_vertices[3 * v + 1],
                            model.template_vertices[3 * v + 2]};
            const double s = amp * std::sin(vdot(wave, p) / span * 3.14159265358979323846 + phase);
            for (int d = 0; d < 3; ++d)
                model.shape_basis[(static_cast<std::size_t>(b) * kHandVertices + v) * 3 + d] =
                    s * dirn[static_cast<std::size_t>(d)] + radial * p[static_cast<std::size_t>(d)];
        }
    }

    // --- joint regressor: Gaussian falloff to the joint center -------------
    model.joint_regressor.assign(static_cast<std::size_t>(kHandJoints) * kHandVertices, 0.0);
    for (int j = 0; j < kHandJoints; ++j) {
        double total = 0.0;
        for (int v = 0; v < kHandVertices; ++v) {
            const Vec3 p = {model.template_vertices[3 * v], model.template_vertices[3 * v + 1],
                            model.template_vertices[3 * v + 2]};
            const double d = vnorm(vsub(p, kJointCenters[static_cast<std::size_t>(j)]));
            const double w = std::exp(-(d * d) / (2.0 * 10.0 * 10.0));
            model.joint_regressor[static_cast<std::size_t>(j) * kHandVertices + v] = w;
            total += w;
        }
        for (int v = 0; v < kHandVertices; ++v)
            model.joint_regressor[static_cast<std::size_t>(j) * kHandVertices + v] /= total;
    }

    // --- skinning weights: falloff to each joint's outgoing bones ----------
    // A joint's influence region is the segments toward its children (tips
    // keep their own center), so palm tubes bind to the wrist and each
    // phalanx binds to the joint that articulates it.
    std::array<std::vector<int>, kHandJoints> children{};
    for (const auto& [a, b] : hand_skeleton_edges()) children[static_cast<std::size_t>(a)].push_back(b);
    model.skinning_weights.assign(static_cast<std::size_t>(kHandVertices) * kHandJoints, 0.0);
    const double falloff = 6.0;
    for (int v = 0; v < kHandVertices; ++v) {
        const Vec3 p = {model.template_vertices[3 * v], model.template_vertices[3 * v + 1],
                        model.template_vertices[3 * v + 2]};
        double total = 0.0;
        for (int j = 0; j < kHandJoints; ++j) {
            double d;
            if (children[static_cast<std::size_t>(j)].empty()) {
                d = vnorm(vsub(p, kJointCenters[static_cast<std::size_t>(j)]));
            } else {
                d = 1e30;
                for (int c : children[static_cast<std::size_t>(j)])
                    d = std::min(d, point_segment_distance(p, kJointCenters[static_cast<std::size_t>(j)],
                                                           kJointCenters[static_cast<std::size_t>(c)]));
            }
            const double w = std::exp(-d / falloff);
            model.skinning_weights[static_cast<std::size_t>(v) * kHandJoints + j] = w;
            total += w;
        }
        for (int j = 0; j < kHandJoints; ++j)
            model.skinning_weights[static_cast<std::size_t>(v) * kHandJoints + j] /= total;
    }
    return model;
}

void save_hand_model(const std::string& stem, const HandModel& model) {
    BufferWriter buffers;
    buffers.add("template_vertices", {kHandVertices, 3}, model.template_vertices);
    buffers.add("shape_basis", {kShapeParams, kHandVertices, 3}, model.shape_basis);
    buffers.add("joint_regressor", {kHandJoints, kHandVertices}, model.joint_regressor);
    buffers.add("skinning_weights", {kHandVertices, kHandJoints}, model.skinning_weights);
    nlohmann::json meta;
    meta["kind"] = "hand_model";
    meta["seed"] = model.seed;
    meta["version"] = model.version;
    meta["parent"] = model.parent;
    meta["articulated"] = model.articulated;
    save_manifest(stem, buffers, meta);
}

HandModel load_hand_model(const std::string& stem) {
    auto loaded = load_manifest(stem);
    if (loaded.meta.value("kind", "") != "hand_model")
        throw IoError("manifest is not a hand model: " + stem);
    HandModel model;
    model.seed = loaded.meta.at("seed").get<std::uint64_t>();
    model.version = loaded.meta.at("version").get<int>();
    model.parent = loaded.meta.at("parent").get<std::vector<int>>();
    model.articulated = loaded.meta.at("articulated").get<std::vector<int>>();
    model.template_vertices = loaded.buffers.read<double>("template_vertices");
    model.shape_basis = loaded.buffers.read<double>("shape_basis");
    model.joint_regressor = loaded.buffers.read<double>("joint_regressor");
    model.skinning_weights = loaded.buffers.read<double>("skinning_weights");
    return model;
}

} // namespace handmesh

