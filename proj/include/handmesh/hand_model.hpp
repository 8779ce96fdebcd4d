#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "handmesh/hand_graph.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

inline constexpr int kHandVertices = 778;
inline constexpr int kPoseParams = 48;  // 16 axis-angle triples
inline constexpr int kShapeParams = 10;
inline constexpr int kArticulatedJoints = 16; // root + 5 x (MCP, PIP, DIP)
inline constexpr int kHandModelVersion = 1;

// Seeded parametric hand: template mesh, linear shape basis, row-stochastic
// joint regressor and skinning weights, kinematic tree matching the skeleton
// graph. Units are millimeters. Immutable after construction; regeneration
// from (seed, version) is bit-identical.
struct HandModel {
    std::uint64_t seed = 0;
    int version = kHandModelVersion;
    std::vector<double> template_vertices; // 778*3
    std::vector<double> shape_basis;       // 10*778*3
    std::vector<double> joint_regressor;   // 21*778, rows sum to 1
    std::vector<double> skinning_weights;  // 778*21, rows sum to 1, entries >= 0
    std::vector<int> parent;               // 21, -1 at the wrist
    std::vector<int> articulated;          // 16 joint indices, triple t drives articulated[t]
};

HandModel make_hand_model(std::uint64_t seed);

// Manifest + raw-buffer persistence; the seed and version ride in the
// manifest so a loaded model can be checked against regeneration.
void save_hand_model(const std::string& stem, const HandModel& model);
HandModel load_hand_model(const std::string& stem);

// Axis-angle to rotation matrix, differentiable w.r.t. the input 3-vector.
// R = (1 - c2 u) I + c1 [a]_x + c2 a a^T  with u = |a|^2, c1 = sin(t)/t,
// c2 = (1 - cos(t))/t^2, t = |a|; series branches keep both coefficients and
// their derivatives smooth through a = 0.
template <typename T>
Tensor<T> rodrigues(const Tensor<T>& axis_angle) {
    if (axis_angle.numel() != 3) throw ShapeError("rodrigues: need a 3-vector");
    auto a = axis_angle.ndim() == 1 ? axis_angle : reshape(axis_angle, {3});
    auto u = sum(mul(a, a));
    auto c1 = unary_op("rot_c1", u,
        [](T x) -> T {
            if (x < T(1e-8)) return T(1) - x / T(6) + x * x / T(120);
            const T t = std::sqrt(x);
            return std::sin(t) / t;
        },
        [](T x) -> T {
            if (x < T(1e-8)) return T(-1) / T(6) + x / T(60) - x * x / T(1680);
            const T t = std::sqrt(x);
            return (t * std::cos(t) - std::sin(t)) / (T(2) * t * t * t);
        });
    auto c2 = unary_op("rot_c2", u,
        [](T x) -> T {
            if (x < T(1e-8)) return T(0.5) - x / T(24) + x * x / T(720);
            return (T(1) - std::cos(std::sqrt(x))) / x;
        },
        [](T x) -> T {
            if (x < T(1e-8)) return T(-1) / T(24) + x / T(360) - x * x / T(13440);
            const T t = std::sqrt(x);
            return (t * std::sin(t) - T(2) * (T(1) - std::cos(t))) / (T(2) * x * x);
        });
    static const Tensor<T> identity =
        Tensor<T>::from_vector({1, 0, 0, 0, 1, 0, 0, 0, 1}, {3, 3});
    auto cos_term = sub(Tensor<T>::scalar(T(1)), mul(c2, u)); // cos(t)
    auto outer = matmul(reshape(a, {3, 1}), reshape(a, {1, 3}));
    return add(add(scale_by(identity, cos_term), scale_by(skew3(a), c1)),
               scale_by(outer, c2));
}

template <typename T>
struct LbsResult {
    Tensor<T> vertices;    // [778, 3]
    Tensor<T> joints;      // [21, 3], regressed from posed vertices
    Tensor<T> rest_joints; // [21, 3], regressed from the shaped template
};

// Linear blend skinning. theta: [48] axis-angle triples (triple 0 is the
// global root rotation), beta: [10] shape coefficients. Differentiable
// w.r.t. both.
template <typename T>
LbsResult<T> lbs_forward(const HandModel& model, const Tensor<T>& theta, const Tensor<T>& beta) {
    if (theta.numel() != kPoseParams) throw ShapeError("lbs: theta must have 48 entries");
    if (beta.numel() != kShapeParams) throw ShapeError("lbs: beta must have 10 entries");
    for (T v : theta.values())
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("lbs: non-finite theta");
    for (T v : beta.values())
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("lbs: non-finite beta");

    const std::size_t nv = kHandVertices, nj = kHandJoints;
    auto as_tensor = [](const std::vector<double>& d, Shape s) {
        std::vector<T> out(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) out[i] = static_cast<T>(d[i]);
        return Tensor<T>::from_vector(std::move(out), std::move(s));
    };
    auto tmpl = as_tensor(model.template_vertices, {nv, 3});
    auto basis = as_tensor(model.shape_basis, {kShapeParams, nv * 3});
    auto regressor = as_tensor(model.joint_regressor, {nj, nv});

    // shaped template and rest joints
    auto blend = reshape(matmul(reshape(beta, {1, kShapeParams}), basis), {nv, 3});
    auto shaped = add(tmpl, blend);
    auto rest = matmul(regressor, shaped); // [21, 3]

    // local rotations (transposed, for the row-vector convention x' = x R^T + t)
    auto theta_triples = reshape(theta, {kArticulatedJoints, 3});
    std::vector<Tensor<T>> local_rot_t(nj);
    for (int t = 0; t < kArticulatedJoints; ++t) {
        auto axis = reshape(slice(theta_triples, 0, static_cast<std::size_t>(t), 1), {3});
        local_rot_t[static_cast<std::size_t>(model.articulated[t])] =
            transpose2d(rodrigues(axis));
    }

    // forward kinematics; parents precede children in the joint order
    std::vector<Tensor<T>> glob_rot_t(nj), glob_tr(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        auto rj = slice(rest, 0, j, 1); // [1,3]
        const int p = model.parent[j];
        if (p < 0) {
            glob_rot_t[j] = local_rot_t[j];
            glob_tr[j] = sub(rj, matmul(rj, glob_rot_t[j]));
        } else if (local_rot_t[j].defined()) {
            glob_rot_t[j] = matmul(local_rot_t[j], glob_rot_t[static_cast<std::size_t>(p)]);
            glob_tr[j] = add(matmul(sub(rj, matmul(rj, local_rot_t[j])),
                                    glob_rot_t[static_cast<std::size_t>(p)]),
                             glob_tr[static_cast<std::size_t>(p)]);
        } else {
            // non-articulated joints ride their parent's transform
            glob_rot_t[j] = glob_rot_t[static_cast<std::size_t>(p)];
            glob_tr[j] = glob_tr[static_cast<std::size_t>(p)];
        }
    }

    // skinning: V = sum_j w_:,j (shaped R_j^T + t_j)
    Tensor<T> vertices;
    for (std::size_t j = 0; j < nj; ++j) {
        std::vector<T> col(nv);
        for (std::size_t v = 0; v < nv; ++v)
            col[v] = static_cast<T>(model.skinning_weights[v * nj + j]);
        auto posed = add_row_vec(matmul(shaped, glob_rot_t[j]), reshape(glob_tr[j], {3}));
        auto weighted = scale_rows(posed, std::move(col));
        vertices = vertices.defined() ? add(vertices, weighted) : weighted;
    }
    auto joints = matmul(regressor, vertices);
    return {vertices, joints, rest};
}

} // namespace handmesh
