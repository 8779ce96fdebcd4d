#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace handmesh {

// One-sided Jacobi SVD of a 3x3 matrix, A = U diag(s) V^T with s sorted
// descending and U, V orthonormal (completion by cross products for
// rank-deficient inputs).
struct Svd3 {
    std::array<double, 9> u;
    std::array<double, 3> s;
    std::array<double, 9> v;
};
Svd3 svd3(const std::array<double, 9>& a);

// Similarity transform p -> scale * R p + t.
struct Similarity {
    double scale = 1.0;
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> translation{0, 0, 0};
};

std::vector<double> apply_similarity(const Similarity& s, const std::vector<double>& pts);

// Closed-form least-squares similarity aligning pred onto gt (rotation,
// isotropic scale, translation; reflection guarded by flipping the smallest
// singular direction). Throws on n < 3 or degenerate configurations.
Similarity procrustes_similarity(const std::vector<double>& pred, const std::vector<double>& gt);

std::vector<double> procrustes_align(const std::vector<double>& pred, const std::vector<double>& gt);

// Mean per-point Euclidean distance (mm) between two N x 3 point sets.
double mean_point_error(const std::vector<double>& pred, const std::vector<double>& gt);

double pa_mean_point_error(const std::vector<double>& pred, const std::vector<double>& gt);

// Per-point Euclidean distances, for PCK pooling.
std::vector<double> point_errors(const std::vector<double>& pred, const std::vector<double>& gt);

// Area under the fraction-correct curve over a uniform threshold grid
// [0, max_mm] with `steps` trapezoids, normalized to [0, 1].
double auc_of_errors(const std::vector<double>& errors_mm, double max_mm = 50.0, int steps = 100);

// Mesh F-score at threshold tau (mm): harmonic mean of nearest-neighbor
// precision and recall; 0 when both are 0. With known_correspondence the
// per-index distance replaces the nearest-neighbor search.
double f_score(const std::vector<double>& pred_mesh, const std::vector<double>& gt_mesh,
               double tau_mm, bool known_correspondence = false);

struct MetricsReport {
    double mpjpe_mm = 0.0;
    double pa_mpjpe_mm = 0.0;
    double mpvpe_mm = 0.0;
    double pa_mpvpe_mm = 0.0;
    double auc_pck = 0.0; // PA-aligned joint errors, 0-50 mm grid
    double auc_pcv = 0.0; // PA-aligned vertex errors
    double f_at_5 = 0.0;  // PA-aligned meshes
    double f_at_15 = 0.0;
    std::size_t sample_count = 0;

    nlohmann::json to_json() const;
    static std::string csv_header();
    std::string csv_row() const;
};

// Aggregates per-sample joint/vertex predictions against ground truth.
// Samples are (pred_joints 21x3, gt_joints 21x3, pred_verts 778x3,
// gt_verts 778x3), flattened row-major.
struct SamplePrediction {
    std::vector<double> pred_joints;
    std::vector<double> gt_joints;
    std::vector<double> pred_vertices;
    std::vector<double> gt_vertices;
};

MetricsReport compute_metrics(const std::vector<SamplePrediction>& samples);

// PCK curve as (threshold_mm, fraction) rows for plotting.
std::vector<std::pair<double, double>> pck_curve(const std::vector<double>& errors_mm,
                                                 double max_mm = 50.0, int steps = 100);

} // namespace handmesh
