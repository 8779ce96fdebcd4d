// Python bindings for the numeric core: skeleton graph and Laplacians,
// Chebyshev graph convolution, positional encodings, the skinned hand model,
// camera projection, evaluation metrics, and the synthetic data generator.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "handmesh/cross_fusion.hpp"
#include "handmesh/hand_graph.hpp"
#include "handmesh/hand_model.hpp"
#include "handmesh/metrics.hpp"
#include "handmesh/synth_data.hpp"

namespace py = pybind11;
using namespace handmesh;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a, std::size_t expect = 0, const char* what = "array") {
    std::vector<double> out(a.data(), a.data() + a.size());
    if (expect && out.size() != expect)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(expect) +
                         " values, got " + std::to_string(out.size()));
    return out;
}

py::array_t<double> to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
    py::array_t<double> out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> square_op(const Array& m,
                              std::vector<double> (*fn)(const std::vector<double>&, int)) {
    if (m.ndim() != 2 || m.shape(0) != m.shape(1))
        throw ShapeError("expected a square matrix");
    const int n = static_cast<int>(m.shape(0));
    return to_array(fn(to_vector(m), n), {n, n});
}

py::dict sample_to_dict(const Sample& s, int image_size) {
    py::dict d;
    const py::ssize_t size = image_size;
    py::array_t<float> image({py::ssize_t(3), size, size});
    std::copy(s.image.begin(), s.image.end(), image.mutable_data());
    d["image"] = image;
    std::vector<double> pose(kHandJoints * 2);
    for (int j = 0; j < kHandJoints; ++j) {
        pose[static_cast<std::size_t>(2 * j)] = s.pose2d.joints[static_cast<std::size_t>(j)][0];
        pose[static_cast<std::size_t>(2 * j) + 1] = s.pose2d.joints[static_cast<std::size_t>(j)][1];
    }
    d["pose2d"] = to_array(pose, {kHandJoints, 2});
    d["theta"] = to_array(s.theta, {kPoseParams});
    d["beta"] = to_array(s.beta, {kShapeParams});
    d["joints3d"] = to_array(s.joints3d, {kHandJoints, 3});
    d["mesh"] = to_array(s.mesh, {kHandVertices, 3});
    d["translation"] = to_array(s.translation, {3});
    py::array_t<std::uint8_t> mask({size, size});
    std::copy(s.occlusion_mask.begin(), s.occlusion_mask.end(), mask.mutable_data());
    d["occlusion_mask"] = mask;
    d["occlusion_ratio"] = s.occlusion_ratio;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "occlusion-robust 3D hand mesh reconstruction: numeric core";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    // --- skeleton graph -----------------------------------------------------
    m.def("skeleton_edges", [] { return hand_skeleton_edges(); },
          "joint index pairs of the 21-joint hand skeleton");
    m.def("skeleton_adjacency", [] {
        return to_array(adjacency_from_edges(hand_skeleton_edges(), kHandJoints), {21, 21});
    });
    m.def("normalized_laplacian",
          [](const Array& w) { return square_op(w, &normalized_laplacian); }, py::arg("adjacency"),
          "I - D^{-1/2} W D^{-1/2}");
    m.def("scaled_laplacian",
          [](const Array& l, double lambda_max) {
              if (l.ndim() != 2 || l.shape(0) != l.shape(1)) throw ShapeError("expected a square matrix");
              const int n = static_cast<int>(l.shape(0));
              return to_array(scaled_laplacian(to_vector(l), n, lambda_max), {n, n});
          },
          py::arg("laplacian"), py::arg("lambda_max"));
    m.def("lambda_max",
          [](const Array& l) {
              if (l.ndim() != 2 || l.shape(0) != l.shape(1)) throw ShapeError("expected a square matrix");
              return power_iteration_lambda_max(to_vector(l), static_cast<int>(l.shape(0)));
          },
          py::arg("matrix"), "largest eigenvalue by power iteration");

    m.def("cheb_graph_conv",
          [](const Array& scaled_lap, const Array& features, const std::vector<Array>& weights) {
              if (scaled_lap.ndim() != 2 || scaled_lap.shape(0) != scaled_lap.shape(1))
                  throw ShapeError("scaled laplacian must be square");
              const auto n = static_cast<std::size_t>(scaled_lap.shape(0));
              if (features.ndim() != 2 || static_cast<std::size_t>(features.shape(0)) != n)
                  throw ShapeError("features must be [nodes, f_in]");
              if (weights.empty()) throw ContractError("need at least one weight matrix");
              const auto fin = static_cast<std::size_t>(features.shape(1));
              auto lap = Tensor<double>::from_vector(to_vector(scaled_lap), {n, n});
              auto f = Tensor<double>::from_vector(to_vector(features), {n, fin});
              Tensor<double> out, t_prev2 = f, t_prev1;
              for (std::size_t k = 0; k < weights.size(); ++k) {
                  if (weights[k].ndim() != 2 ||
                      static_cast<std::size_t>(weights[k].shape(0)) != fin)
                      throw ShapeError("weight " + std::to_string(k) + " must be [f_in, f_out]");
                  const auto fout = static_cast<std::size_t>(weights[k].shape(1));
                  auto theta = Tensor<double>::from_vector(to_vector(weights[k]), {fin, fout});
                  Tensor<double> t_k;
                  if (k == 0) t_k = t_prev2;
                  else if (k == 1) t_k = t_prev1 = matmul(lap, f);
                  else {
                      t_k = sub(scale(matmul(lap, t_prev1), 2.0), t_prev2);
                      t_prev2 = t_prev1;
                      t_prev1 = t_k;
                  }
                  auto term = matmul(t_k, theta);
                  out = out.defined() ? add(out, term) : term;
              }
              return to_array(out.values(), {static_cast<py::ssize_t>(n),
                                             static_cast<py::ssize_t>(out.dim(1))});
          },
          py::arg("scaled_laplacian"), py::arg("features"), py::arg("weights"),
          "sum_k T_k(L) F Theta_k via the three-term recurrence");

    m.def("positional_encoding",
          [](std::size_t grid_h, std::size_t grid_w, std::size_t d_model) {
              auto table = positional_encoding_table<double>(grid_h, grid_w, d_model);
              return to_array(table.values(), {static_cast<py::ssize_t>(grid_h * grid_w),
                                               static_cast<py::ssize_t>(d_model)});
          },
          py::arg("grid_h"), py::arg("grid_w"), py::arg("d_model"));

    // --- hand model -----------------------------------------------------------
    m.def("rodrigues",
          [](const Array& axis_angle) {
              auto r = rodrigues(Tensor<double>::from_vector(to_vector(axis_angle, 3, "axis angle"), {3}));
              return to_array(r.values(), {3, 3});
          },
          py::arg("axis_angle"));

    py::class_<HandModel>(m, "HandModel")
        .def(py::init([](std::uint64_t seed) { return make_hand_model(seed); }), py::arg("seed") = 2024)
        .def_property_readonly("seed", [](const HandModel& h) { return h.seed; })
        .def_property_readonly("version", [](const HandModel& h) { return h.version; })
        .def_property_readonly("template_vertices",
                               [](const HandModel& h) { return to_array(h.template_vertices, {778, 3}); })
        .def_property_readonly("shape_basis",
                               [](const HandModel& h) { return to_array(h.shape_basis, {10, 778, 3}); })
        .def_property_readonly("joint_regressor",
                               [](const HandModel& h) { return to_array(h.joint_regressor, {21, 778}); })
        .def_property_readonly("skinning_weights",
                               [](const HandModel& h) { return to_array(h.skinning_weights, {778, 21}); })
        .def_property_readonly("parents", [](const HandModel& h) { return h.parent; })
        .def("lbs",
             [](const HandModel& h, const Array& theta, const Array& beta) {
                 auto out = lbs_forward(h, Tensor<double>::from_vector(to_vector(theta, 48, "theta"), {48}),
                                        Tensor<double>::from_vector(to_vector(beta, 10, "beta"), {10}));
                 return py::make_tuple(to_array(out.vertices.values(), {778, 3}),
                                       to_array(out.joints.values(), {21, 3}));
             },
             py::arg("theta"), py::arg("beta"),
             "linear blend skinning: (vertices [778,3], joints [21,3])");

    m.def("project",
          [](const Array& joints, double focal, double center_u, double center_v) {
              Camera cam;
              cam.focal = focal;
              cam.center_u = center_u;
              cam.center_v = center_v;
              auto pose = project(to_vector(joints, 63, "joints"), cam);
              std::vector<double> flat(21 * 2);
              for (int j = 0; j < 21; ++j) {
                  flat[static_cast<std::size_t>(2 * j)] = pose.joints[static_cast<std::size_t>(j)][0];
                  flat[static_cast<std::size_t>(2 * j) + 1] = pose.joints[static_cast<std::size_t>(j)][1];
              }
              return to_array(flat, {21, 2});
          },
          py::arg("joints_cam"), py::arg("focal"), py::arg("center_u"), py::arg("center_v"));

    // --- metrics ----------------------------------------------------------------
    m.def("mpjpe",
          [](const Array& pred, const Array& gt) { return mean_point_error(to_vector(pred), to_vector(gt)); },
          py::arg("pred"), py::arg("gt"));
    m.def("pa_mpjpe",
          [](const Array& pred, const Array& gt) { return pa_mean_point_error(to_vector(pred), to_vector(gt)); },
          py::arg("pred"), py::arg("gt"));
    m.def("procrustes_align",
          [](const Array& pred, const Array& gt) {
              auto aligned = procrustes_align(to_vector(pred), to_vector(gt));
              return to_array(aligned, {static_cast<py::ssize_t>(aligned.size() / 3), 3});
          },
          py::arg("pred"), py::arg("gt"),
          "similarity-aligned copy of pred (rotation, isotropic scale, translation)");
    m.def("auc",
          [](const Array& errors, double max_mm, int steps) {
              return auc_of_errors(to_vector(errors), max_mm, steps);
          },
          py::arg("errors_mm"), py::arg("max_mm") = 50.0, py::arg("steps") = 100);
    m.def("f_score",
          [](const Array& pred, const Array& gt, double tau, bool known_correspondence) {
              return f_score(to_vector(pred), to_vector(gt), tau, known_correspondence);
          },
          py::arg("pred_mesh"), py::arg("gt_mesh"), py::arg("tau_mm"),
          py::arg("known_correspondence") = false);
    m.def("evaluate_metrics",
          [](const std::vector<py::tuple>& samples) {
              std::vector<SamplePrediction> preds;
              for (const auto& t : samples) {
                  if (t.size() != 4)
                      throw ContractError("each sample is (pred_joints, gt_joints, pred_mesh, gt_mesh)");
                  SamplePrediction p;
                  p.pred_joints = to_vector(t[0].cast<Array>());
                  p.gt_joints = to_vector(t[1].cast<Array>());
                  p.pred_vertices = to_vector(t[2].cast<Array>());
                  p.gt_vertices = to_vector(t[3].cast<Array>());
                  preds.push_back(std::move(p));
              }
              auto r = compute_metrics(preds);
              py::dict d;
              d["mpjpe_mm"] = r.mpjpe_mm;
              d["pa_mpjpe_mm"] = r.pa_mpjpe_mm;
              d["mpvpe_mm"] = r.mpvpe_mm;
              d["pa_mpvpe_mm"] = r.pa_mpvpe_mm;
              d["auc_pck"] = r.auc_pck;
              d["auc_pcv"] = r.auc_pcv;
              d["f_at_5"] = r.f_at_5;
              d["f_at_15"] = r.f_at_15;
              d["sample_count"] = r.sample_count;
              return d;
          },
          py::arg("samples"),
          "aggregate report over (pred_joints, gt_joints, pred_mesh, gt_mesh) tuples");

    // --- synthetic data -----------------------------------------------------------
    m.def("generate_samples",
          [](std::uint64_t seed, int n_samples, double occlusion_level, int image_size,
             const std::string& split, std::uint64_t model_seed) {
              DatasetConfig cfg;
              cfg.seed = seed;
              cfg.n_samples = n_samples;
              cfg.occlusion_level = occlusion_level;
              cfg.image_size = image_size;
              cfg.model_seed = model_seed;
              cfg.split = split;
              auto hand = make_hand_model(model_seed);
              auto samples = generate_dataset(cfg, hand);
              py::list out;
              for (const auto& s : samples) out.append(sample_to_dict(s, image_size));
              return out;
          },
          py::arg("seed"), py::arg("n_samples"), py::arg("occlusion_level") = 0.5,
          py::arg("image_size") = 64, py::arg("split") = "train", py::arg("model_seed") = 2024);
    m.def("write_dataset",
          [](const std::string& stem, std::uint64_t seed, int n_samples, double occlusion_level,
             int image_size, const std::string& split, std::uint64_t model_seed) {
              DatasetConfig cfg;
              cfg.seed = seed;
              cfg.n_samples = n_samples;
              cfg.occlusion_level = occlusion_level;
              cfg.image_size = image_size;
              cfg.model_seed = model_seed;
              cfg.split = split;
              auto hand = make_hand_model(model_seed);
              save_dataset(stem, cfg, generate_dataset(cfg, hand));
              return py::make_tuple(stem + ".json", stem + ".bin");
          },
          py::arg("stem"), py::arg("seed"), py::arg("n_samples"), py::arg("occlusion_level") = 0.5,
          py::arg("image_size") = 64, py::arg("split") = "train", py::arg("model_seed") = 2024);

    m.attr("HAND_JOINTS") = kHandJoints;
    m.attr("HAND_VERTICES") = kHandVertices;
    m.attr("POSE_PARAMS") = kPoseParams;
    m.attr("SHAPE_PARAMS") = kShapeParams;
}
