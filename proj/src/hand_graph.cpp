#include "handmesh/hand_graph.hpp"

#include <cmath>
#include <fstream>

#include "handmesh/error.hpp"
#include "handmesh/rng.hpp"

namespace handmesh {

const std::vector<std::pair<int, int>>& hand_skeleton_edges() {
    // Wrist fans out to the five MCP joints; each finger is a 4-joint chain.
    static const std::vector<std::pair<int, int>> edges = {
        {0, 1},   {1, 2},   {2, 3},   {3, 4},   // thumb
        {0, 5},   {5, 6},   {6, 7},   {7, 8},   // index
        {0, 9},   {9, 10},  {10, 11}, {11, 12}, // middle
        {0, 13},  {13, 14}, {14, 15}, {15, 16}, // ring
        {0, 17},  {17, 18}, {18, 19}, {19, 20}, // pinky
    };
    return edges;
}

std::vector<double> adjacency_from_edges(const std::vector<std::pair<int, int>>& edges, int n) {
    std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n || j >= n) throw ContractError("edge index out of range");
        if (i == j) throw ContractError("self-loop in edge list");
        w[static_cast<std::size_t>(i) * n + j] = 1.0;
        w[static_cast<std::size_t>(j) * n + i] = 1.0;
    }
    return w;
}

std::vector<double> normalized_laplacian(const std::vector<double>& adjacency, int n) {
    const auto nn = static_cast<std::size_t>(n);
    if (adjacency.size() != nn * nn) throw ShapeError("laplacian: adjacency must be n*n");
    std::vector<double> dinv_sqrt(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < nn; ++j) deg += adjacency[i * nn + j];
        if (deg <= 0.0)
            throw NumericError("degenerate graph: node " + std::to_string(i) + " has degree 0");
        dinv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    std::vector<double> lap(nn * nn);
    for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j) {
            const double norm = dinv_sqrt[i] * adjacency[i * nn + j] * dinv_sqrt[j];
            lap[i * nn + j] = (i == j ? 1.0 : 0.0) - norm;
        }
    return lap;
}

std::vector<double> scaled_laplacian(const std::vector<double>& laplacian, int n, double lambda_max) {
    if (lambda_max <= 0.0) throw ContractError("scaled laplacian: lambda_max must be positive");
    const auto nn = static_cast<std::size_t>(n);
    if (laplacian.size() != nn * nn) throw ShapeError("scaled laplacian: matrix must be n*n");
    std::vector<double> out(nn * nn);
    for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j)
            out[i * nn + j] = 2.0 * laplacian[i * nn + j] / lambda_max - (i == j ? 1.0 : 0.0);
    return out;
}

double power_iteration_lambda_max(const std::vector<double>& matrix, int n, int max_iters,
                                  double rel_tol) {
    const auto nn = static_cast<std::size_t>(n);
    if (matrix.size() != nn * nn) throw ShapeError("power iteration: matrix must be n*n");
    Rng rng(0x9d2c5680u); // fixed start vector keeps the result reproducible
    std::vector<double> v(nn), av(nn);
    for (auto& x : v) x = rng.uniform(0.1, 1.0);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;

    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < nn; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < nn; ++j) acc += matrix[i * nn + j] * v[j];
            av[i] = acc;
        }
        double rayleigh = 0.0, vnorm = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            rayleigh += v[i] * av[i];
            vnorm += av[i] * av[i];
        }
        vnorm = std::sqrt(vnorm);
        if (vnorm == 0.0) return 0.0;
        for (std::size_t i = 0; i < nn; ++i) v[i] = av[i] / vnorm;
        const double change = std::abs(rayleigh - lambda);
        lambda = rayleigh;
        if (change <= rel_tol * std::max(1.0, std::abs(lambda))) break;
    }
    return lambda;
}

SkeletonGraph graph_from_adjacency(std::vector<double> adjacency, int n) {
    SkeletonGraph g;
    g.joints = n;
    g.adjacency = std::move(adjacency);
    const auto nn = static_cast<std::size_t>(n);
    g.degree.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < nn; ++j) deg += g.adjacency[i * nn + j];
        g.degree[i] = deg;
    }
    g.laplacian = normalized_laplacian(g.adjacency, n);
    g.lambda_max = power_iteration_lambda_max(g.laplacian, n);
    g.laplacian_scaled = scaled_laplacian(g.laplacian, n, g.lambda_max);
    return g;
}

SkeletonGraph build_hand_skeleton() {
    return graph_from_adjacency(adjacency_from_edges(hand_skeleton_edges(), kHandJoints),
                                kHandJoints);
}

void write_edge_list(const std::string& path, const std::vector<std::pair<int, int>>& edges) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& [i, j] : edges) f << i << " " << j << "\n";
    if (!f) throw IoError("write failed: " + path);
}

std::vector<std::pair<int, int>> read_edge_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::pair<int, int>> edges;
    int i = 0, j = 0;
    while (f >> i >> j) edges.emplace_back(i, j);
    return edges;
}

} // namespace handmesh
