#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "handmesh/config.hpp"
#include "handmesh/metrics.hpp"
#include "handmesh/model.hpp"
#include "handmesh/synth_data.hpp"

namespace handmesh {

struct TrainResult {
    std::vector<double> epoch_losses; // mean train loss per epoch
    std::string checkpoint_stem;      // manifest/buffer pair written at the end
    std::string log_csv;              // per-epoch loss/metric rows
};

// Deterministic training loop: given (config, data, output dir), the loss
// curve and final checkpoint are identical across runs on the same build.
// Throws NumericError with a diagnostic if the loss turns non-finite.
TrainResult train_model(const RunConfig& cfg, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& test_set, const std::string& out_dir);

struct EvaluationResult {
    MetricsReport overall;
    // occlusion-ratio bins: [0,0.25), [0.25,0.5), [0.5,1]
    std::map<std::string, MetricsReport> per_occlusion_bin;
    // PA-aligned per-joint errors pooled over the split, for PCK curves
    std::vector<double> pa_joint_errors;
};

// Scores a live model on a split, injecting noisy ground-truth poses in
// place of a detector. max_samples 0 means the whole split.
template <typename T>
EvaluationResult evaluate_model(const HandNet<T>& model, const std::vector<Sample>& test_set,
                                std::size_t max_samples = 0);

// Rebuilds the model recorded in a checkpoint manifest and scores it.
EvaluationResult evaluate_checkpoint(const std::string& checkpoint_stem,
                                     const std::vector<Sample>& test_set,
                                     std::size_t max_samples = 0);

RunConfig config_from_checkpoint(const std::string& checkpoint_stem);

struct AblationRow {
    std::string label; // "key=value;key=value"
    MetricsReport report;
};

// Trains/evaluates one run per grid point (cartesian product of the axes)
// on shared data; returns one fully populated row each. Axes touching data
// keys are rejected so every run sees identical samples.
std::vector<AblationRow>
run_ablation(const RunConfig& base,
             const std::vector<std::pair<std::string, std::vector<std::string>>>& axes,
             const std::string& out_dir);

std::string ablation_csv(const std::vector<AblationRow>& rows);

} // namespace handmesh
