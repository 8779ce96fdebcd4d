#pragma once

#include <string>
#include <utility>
#include <vector>

#include "handmesh/params.hpp"
#include "handmesh/tensor.hpp"

namespace handmesh {

// Hand skeleton graph plus its Laplacian machinery. All matrices are dense
// row-major double, J x J. Immutable after construction.
struct SkeletonGraph {
    int joints = 0;
    std::vector<double> adjacency;        // symmetric 0/1, zero diagonal
    std::vector<double> degree;           // per-node degree (diagonal of D)
    std::vector<double> laplacian;        // I - D^{-1/2} W D^{-1/2}
    std::vector<double> laplacian_scaled; // 2 L / lambda_max - I
    double lambda_max = 0.0;
};

// Joint indexing: 0 = wrist, then per finger (thumb, index, middle, ring,
// pinky) the chain MCP, PIP, DIP, TIP. Edge table version 1.
inline constexpr int kHandJoints = 21;
inline constexpr int kWristJoint = 0;

const std::vector<std::pair<int, int>>& hand_skeleton_edges();

std::vector<double> adjacency_from_edges(const std::vector<std::pair<int, int>>& edges, int n);

// L = I - D^{-1/2} W D^{-1/2}. Throws NumericError on a zero-degree node.
std::vector<double> normalized_laplacian(const std::vector<double>& adjacency, int n);

// 2 L / lambda_max - I. Throws ContractError for lambda_max <= 0.
std::vector<double> scaled_laplacian(const std::vector<double>& laplacian, int n, double lambda_max);

// Largest eigenvalue of a symmetric PSD matrix by power iteration
// (deterministic start vector; stops on relative Rayleigh change below
// 1e-10 or at the iteration cap).
double power_iteration_lambda_max(const std::vector<double>& matrix, int n,
                                  int max_iters = 2000, double rel_tol = 1e-13);

// Full graph construction from an arbitrary adjacency (used for permutation
// tests) and for the canonical 21-joint skeleton.
SkeletonGraph graph_from_adjacency(std::vector<double> adjacency, int n);
SkeletonGraph build_hand_skeleton();

// Plain-text edge list ("i j" per line) for test fixtures.
void write_edge_list(const std::string& path, const std::vector<std::pair<int, int>>& edges);
std::vector<std::pair<int, int>> read_edge_list(const std::string& path);

// Chebyshev spectral graph convolution layer:
//   out = sum_{k=0}^{K-1} T_k(L_scaled) * F_in * Theta_k
// with T_0 = I, T_1 = L_scaled, T_k = 2 L_scaled T_{k-1} - T_{k-2}. The
// recurrence is applied to the feature matrix directly, so no dense T_k is
// ever materialized.
template <typename T>
class ChebGraphConv {
public:
    ChebGraphConv() = default;

    ChebGraphConv(ParamSet<T>& params, const std::string& name, const SkeletonGraph& graph,
                  int order, std::size_t f_in, std::size_t f_out)
        : order_(order), f_in_(f_in), f_out_(f_out) {
        if (order < 1) throw ContractError("cheb conv: order must be >= 1");
        std::vector<T> lap(graph.laplacian_scaled.size());
        for (std::size_t i = 0; i < lap.size(); ++i)
            lap[i] = static_cast<T>(graph.laplacian_scaled[i]);
        const auto j = static_cast<std::size_t>(graph.joints);
        laplacian_ = Tensor<T>::from_vector(std::move(lap), {j, j});
        for (int k = 0; k < order; ++k)
            theta_.push_back(params.kaiming(name + ".theta" + std::to_string(k), {f_in, f_out},
                                            f_in * static_cast<std::size_t>(order)));
    }

    Tensor<T> forward(const Tensor<T>& f_in) const {
        if (f_in.ndim() != 2 || f_in.dim(1) != f_in_ || f_in.dim(0) != laplacian_.dim(0))
            throw ShapeError("cheb conv: input must be [J," + std::to_string(f_in_) + "], got " +
                             shape_str(f_in.shape()));
        Tensor<T> t_prev2 = f_in;                 // T_0 F
        Tensor<T> out = matmul(t_prev2, theta_[0]);
        if (order_ == 1) return out;
        Tensor<T> t_prev1 = matmul(laplacian_, f_in); // T_1 F
        out = add(out, matmul(t_prev1, theta_[1]));
        for (int k = 2; k < order_; ++k) {
            Tensor<T> t_k = sub(scale(matmul(laplacian_, t_prev1), T(2)), t_prev2);
            out = add(out, matmul(t_k, theta_[k]));
            t_prev2 = t_prev1;
            t_prev1 = t_k;
        }
        return out;
    }

    int order() const { return order_; }
    std::size_t f_in() const { return f_in_; }
    std::size_t f_out() const { return f_out_; }
    const std::vector<Tensor<T>>& weights() const { return theta_; }

private:
    int order_ = 0;
    std::size_t f_in_ = 0, f_out_ = 0;
    Tensor<T> laplacian_; // constant, shared by all invocations
    std::vector<Tensor<T>> theta_;
};

} // namespace handmesh
