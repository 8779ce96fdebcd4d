#include "handmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "handmesh/error.hpp"

namespace handmesh {

namespace {

double det3(const std::array<double, 9>& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void normalize_col(std::array<double, 9>& m, int c) {
    const double n = std::sqrt(m[c] * m[c] + m[3 + c] * m[3 + c] + m[6 + c] * m[6 + c]);
    if (n > 0) {
        m[c] /= n;
        m[3 + c] /= n;
        m[6 + c] /= n;
    }
}

void cross_col(const std::array<double, 9>& m, int a, int b, std::array<double, 9>& out, int c) {
    out[c] = m[3 + a] * m[6 + b] - m[6 + a] * m[3 + b];
    out[3 + c] = m[6 + a] * m[b] - m[a] * m[6 + b];
    out[6 + c] = m[a] * m[3 + b] - m[3 + a] * m[b];
}

} // namespace

Svd3 svd3(const std::array<double, 9>& a) {
    // One-sided Jacobi: rotate column pairs of B until all are orthogonal,
    // accumulating the rotations into V; then s_i = |col_i|, U = B / s.
    std::array<double, 9> b = a;
    std::array<double, 9> v = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (int i = 0; i < 3; ++i) {
                    alpha += b[3 * i + p] * b[3 * i + p];
                    beta += b[3 * i + q] * b[3 * i + q];
                    gamma += b[3 * i + p] * b[3 * i + q];
                }
                off = std::max(off, std::abs(gamma) / std::max(1e-300, std::sqrt(alpha * beta)));
                if (std::abs(gamma) < 1e-300 || std::abs(gamma) < 1e-15 * std::sqrt(alpha * beta))
                    continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < 3; ++i) {
                    const double bp = b[3 * i + p], bq = b[3 * i + q];
                    b[3 * i + p] = c * bp - s * bq;
                    b[3 * i + q] = s * bp + c * bq;
                    const double vp = v[3 * i + p], vq = v[3 * i + q];
                    v[3 * i + p] = c * vp - s * vq;
                    v[3 * i + q] = s * vp + c * vq;
                }
            }
        if (off < 1e-14) break;
    }
    Svd3 out;
    std::array<double, 3> s;
    for (int c = 0; c < 3; ++c)
        s[static_cast<std::size_t>(c)] = std::sqrt(b[c] * b[c] + b[3 + c] * b[3 + c] + b[6 + c] * b[6 + c]);
    // descending order
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int x, int y) { return s[static_cast<std::size_t>(x)] > s[static_cast<std::size_t>(y)]; });
    std::array<double, 9> bs, vs;
    for (int c = 0; c < 3; ++c) {
        out.s[static_cast<std::size_t>(c)] = s[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])];
        for (int i = 0; i < 3; ++i) {
            bs[static_cast<std::size_t>(3 * i + c)] = b[3 * i + order[static_cast<std::size_t>(c)]];
            vs[static_cast<std::size_t>(3 * i + c)] = v[3 * i + order[static_cast<std::size_t>(c)]];
        }
    }
    // U columns: normalized B columns, completed orthonormally where s ~ 0.
    const double scale = std::max(out.s[0], 1e-300);
    for (int c = 0; c < 3; ++c) {
        if (out.s[static_cast<std::size_t>(c)] > 1e-12 * scale) {
            normalize_col(bs, c);
        } else if (c == 2) {
            cross_col(bs, 0, 1, bs, 2);
            normalize_col(bs, 2);
        } else if (c == 1) {
            // rank-1 input: pick any direction orthogonal to column 0
            const std::array<double, 3> c0 = {bs[0], bs[3], bs[6]};
            std::array<double, 3> probe = std::abs(c0[0]) < 0.9 ? std::array<double, 3>{1, 0, 0}
                                                                : std::array<double, 3>{0, 1, 0};
            bs[1] = c0[1] * probe[2] - c0[2] * probe[1];
            bs[4] = c0[2] * probe[0] - c0[0] * probe[2];
            bs[7] = c0[0] * probe[1] - c0[1] * probe[0];
            normalize_col(bs, 1);
        }
    }
    out.u = bs;
    out.v = vs;
    return out;
}

std::vector<double> apply_similarity(const Similarity& sim, const std::vector<double>& pts) {
    std::vector<double> out(pts.size());
    const auto& r = sim.rotation;
    for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
        for (int d = 0; d < 3; ++d)
            out[i + static_cast<std::size_t>(d)] =
                sim.scale * (r[static_cast<std::size_t>(3 * d)] * pts[i] +
                             r[static_cast<std::size_t>(3 * d + 1)] * pts[i + 1] +
                             r[static_cast<std::size_t>(3 * d + 2)] * pts[i + 2]) +
                sim.translation[static_cast<std::size_t>(d)];
    }
    return out;
}

Similarity procrustes_similarity(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size()) throw ShapeError("procrustes: point sets differ in size");
    if (pred.size() % 3 != 0) throw ShapeError("procrustes: points must be N x 3");
    const std::size_t n = pred.size() / 3;
    if (n < 3) throw ContractError("procrustes: need at least 3 points");

    std::array<double, 3> mu_p = {0, 0, 0}, mu_g = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d) {
            mu_p[static_cast<std::size_t>(d)] += pred[3 * i + static_cast<std::size_t>(d)] / static_cast<double>(n);
            mu_g[static_cast<std::size_t>(d)] += gt[3 * i + static_cast<std::size_t>(d)] / static_cast<double>(n);
        }
    // cross-covariance (gt-centered) x (pred-centered)^T and pred variance
    std::array<double, 9> cov = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    double var_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 3> dp, dg;
        for (int d = 0; d < 3; ++d) {
            dp[static_cast<std::size_t>(d)] = pred[3 * i + static_cast<std::size_t>(d)] - mu_p[static_cast<std::size_t>(d)];
            dg[static_cast<std::size_t>(d)] = gt[3 * i + static_cast<std::size_t>(d)] - mu_g[static_cast<std::size_t>(d)];
        }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                cov[static_cast<std::size_t>(3 * r + c)] += dg[static_cast<std::size_t>(r)] * dp[static_cast<std::size_t>(c)] / static_cast<double>(n);
        var_p += (dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2]) / static_cast<double>(n);
    }
    if (var_p < 1e-18) throw NumericError("procrustes: degenerate prediction (zero spread)");

    const Svd3 svd = svd3(cov);
    if (svd.s[1] < 1e-12 * std::max(svd.s[0], 1e-300))
        throw NumericError("procrustes: degenerate configuration (collinear points)");
    // reflection guard: flip the smallest singular direction if needed
    const double sign = det3(svd.u) * det3(svd.v) < 0.0 ? -1.0 : 1.0;

    Similarity sim;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = k == 2 ? sign : 1.0;
                acc += svd.u[static_cast<std::size_t>(3 * r + k)] * d * svd.v[static_cast<std::size_t>(3 * c + k)];
            }
            sim.rotation[static_cast<std::size_t>(3 * r + c)] = acc;
        }
    const double trace = svd.s[0] + svd.s[1] + sign * svd.s[2];
    sim.scale = trace / var_p;
    for (int d = 0; d < 3; ++d) {
        double rm = 0.0;
        for (int k = 0; k < 3; ++k)
            rm += sim.rotation[static_cast<std::size_t>(3 * d + k)] * mu_p[static_cast<std::size_t>(k)];
        sim.translation[static_cast<std::size_t>(d)] = mu_g[static_cast<std::size_t>(d)] - sim.scale * rm;
    }
    return sim;
}

std::vector<double> procrustes_align(const std::vector<double>& pred, const std::vector<double>& gt) {
    return apply_similarity(procrustes_similarity(pred, gt), pred);
}

double mean_point_error(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0)
        throw ShapeError("point error: mismatched N x 3 sets");
    if (pred.empty()) throw ContractError("point error: empty point set");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); i += 3) {
        const double dx = pred[i] - gt[i];
        const double dy = pred[i + 1] - gt[i + 1];
        const double dz = pred[i + 2] - gt[i + 2];
        acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return acc / (static_cast<double>(pred.size()) / 3.0);
}

double pa_mean_point_error(const std::vector<double>& pred, const std::vector<double>& gt) {
    return mean_point_error(procrustes_align(pred, gt), gt);
}

std::vector<double> point_errors(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0)
        throw ShapeError("point errors: mismatched N x 3 sets");
    std::vector<double> out;
    out.reserve(pred.size() / 3);
    for (std::size_t i = 0; i < pred.size(); i += 3) {
        const double dx = pred[i] - gt[i];
        const double dy = pred[i + 1] - gt[i + 1];
        const double dz = pred[i + 2] - gt[i + 2];
        out.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return out;
}

double auc_of_errors(const std::vector<double>& errors_mm, double max_mm, int steps) {
    if (errors_mm.empty()) throw ContractError("auc: empty error list");
    if (max_mm <= 0 || steps < 1) throw ContractError("auc: invalid grid");
    auto pck = [&](double tau) {
        std::size_t ok = 0;
        for (double e : errors_mm) ok += e <= tau ? 1 : 0;
        return static_cast<double>(ok) / static_cast<double>(errors_mm.size());
    };
    double area = 0.0;
    double prev = pck(0.0);
    for (int i = 1; i <= steps; ++i) {
        const double tau = max_mm * static_cast<double>(i) / static_cast<double>(steps);
        const double cur = pck(tau);
        area += 0.5 * (prev + cur) * (max_mm / static_cast<double>(steps));
        prev = cur;
    }
    return area / max_mm;
}

std::vector<std::pair<double, double>> pck_curve(const std::vector<double>& errors_mm,
                                                 double max_mm, int steps) {
    if (errors_mm.empty()) throw ContractError("pck: empty error list");
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i <= steps; ++i) {
        const double tau = max_mm * static_cast<double>(i) / static_cast<double>(steps);
        std::size_t ok = 0;
        for (double e : errors_mm) ok += e <= tau ? 1 : 0;
        out.emplace_back(tau, static_cast<double>(ok) / static_cast<double>(errors_mm.size()));
    }
    return out;
}

double f_score(const std::vector<double>& pred_mesh, const std::vector<double>& gt_mesh,
               double tau_mm, bool known_correspondence) {
    if (tau_mm <= 0) throw ContractError("f-score: tau must be positive");
    if (pred_mesh.empty() || gt_mesh.empty()) throw ContractError("f-score: empty mesh");
    if (pred_mesh.size() % 3 != 0 || gt_mesh.size() % 3 != 0)
        throw ShapeError("f-score: meshes must be N x 3");
    const std::size_t np = pred_mesh.size() / 3, ng = gt_mesh.size() / 3;

    auto within = [&](const std::vector<double>& from, std::size_t nf,
                      const std::vector<double>& to, std::size_t nt) {
        std::size_t hit = 0;
        const double tau2 = tau_mm * tau_mm;
        for (std::size_t i = 0; i < nf; ++i) {
            double best = 1e300;
            if (known_correspondence) {
                const std::size_t j = i;
                const double dx = from[3 * i] - to[3 * j];
                const double dy = from[3 * i + 1] - to[3 * j + 1];
                const double dz = from[3 * i + 2] - to[3 * j + 2];
                best = dx * dx + dy * dy + dz * dz;
            } else {
                for (std::size_t j = 0; j < nt; ++j) {
                    const double dx = from[3 * i] - to[3 * j];
                    const double dy = from[3 * i + 1] - to[3 * j + 1];
                    const double dz = from[3 * i + 2] - to[3 * j + 2];
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 < best) best = d2;
                }
            }
            if (best <= tau2) ++hit;
        }
        return static_cast<double>(hit) / static_cast<double>(nf);
    };
    if (known_correspondence && np != ng)
        throw ShapeError("f-score: correspondence variant needs equal vertex counts");
    const double precision = within(pred_mesh, np, gt_mesh, ng);
    const double recall = within(gt_mesh, ng, pred_mesh, np);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["mpjpe_mm"] = mpjpe_mm;
    j["pa_mpjpe_mm"] = pa_mpjpe_mm;
    j["mpvpe_mm"] = mpvpe_mm;
    j["pa_mpvpe_mm"] = pa_mpvpe_mm;
    j["auc_pck"] = auc_pck;
    j["auc_pcv"] = auc_pcv;
    j["f_at_5"] = f_at_5;
    j["f_at_15"] = f_at_15;
    j["sample_count"] = sample_count;
    return j;
}

std::string MetricsReport::csv_header() {
    return "mpjpe_mm,pa_mpjpe_mm,mpvpe_mm,pa_mpvpe_mm,auc_pck,auc_pcv,f_at_5,f_at_15,sample_count";
}

std::string MetricsReport::csv_row() const {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << mpjpe_mm << "," << pa_mpjpe_mm << "," << mpvpe_mm << "," << pa_mpvpe_mm
       << "," << auc_pck << "," << auc_pcv << "," << f_at_5 << "," << f_at_15 << ","
       << sample_count;
    return os.str();
}

MetricsReport compute_metrics(const std::vector<SamplePrediction>& samples) {
    if (samples.empty()) throw ContractError("metrics: no samples");
    MetricsReport r;
    r.sample_count = samples.size();
    std::vector<double> joint_errors, vertex_errors;
    for (const auto& s : samples) {
        r.mpjpe_mm += mean_point_error(s.pred_joints, s.gt_joints);
        r.mpvpe_mm += mean_point_error(s.pred_vertices, s.gt_vertices);
        const auto aligned_j = procrustes_align(s.pred_joints, s.gt_joints);
        const auto aligned_v = procrustes_align(s.pred_vertices, s.gt_vertices);
        r.pa_mpjpe_mm += mean_point_error(aligned_j, s.gt_joints);
        r.pa_mpvpe_mm += mean_point_error(aligned_v, s.gt_vertices);
        // alignment roundoff below a nanometer is treated as an exact hit
        for (double e : point_errors(aligned_j, s.gt_joints))
            joint_errors.push_back(e < 1e-9 ? 0.0 : e);
        for (double e : point_errors(aligned_v, s.gt_vertices))
            vertex_errors.push_back(e < 1e-9 ? 0.0 : e);
        r.f_at_5 += f_score(aligned_v, s.gt_vertices, 5.0);
        r.f_at_15 += f_score(aligned_v, s.gt_vertices, 15.0);
    }
    const auto n = static_cast<double>(samples.size());
    r.mpjpe_mm /= n;
    r.mpvpe_mm /= n;
    r.pa_mpjpe_mm /= n;
    r.pa_mpvpe_mm /= n;
    r.f_at_5 /= n;
    r.f_at_15 /= n;
    r.auc_pck = auc_of_errors(joint_errors);
    r.auc_pcv = auc_of_errors(vertex_errors);
    return r;
}

} // namespace handmesh
