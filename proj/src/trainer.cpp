#include "handmesh/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "handmesh/checkpoint.hpp"
#include "handmesh/optim.hpp"

namespace handmesh {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5A17F00D5EEDULL;
constexpr std::uint64_t kTrainNoiseSalt = 0x6E015E7AA1ULL;
constexpr std::uint64_t kEvalNoiseSalt = 0xE7A1BEEFULL;

struct CheckedModeGuard {
    bool saved;
    explicit CheckedModeGuard(bool enable) : saved(checked_mode()) { checked_mode() = enable; }
    ~CheckedModeGuard() { checked_mode() = saved; }
};

void check_dataset(const RunConfig& cfg, const std::vector<Sample>& set, const char* name) {
    if (set.empty()) throw ContractError(std::string("trainer: ") + name + " dataset is missing or empty");
    const auto expect = static_cast<std::size_t>(3) * cfg.image_size * cfg.image_size;
    if (set.front().image.size() != expect)
        throw ContractError(std::string("trainer: ") + name +
                            " dataset image size does not match model.image_size");
}

nlohmann::json config_meta(const RunConfig& cfg) {
    nlohmann::json j;
    for (const auto& [k, v] : cfg.to_map()) j[k] = v;
    return j;
}

template <typename T>
EvaluationResult evaluate_impl(const HandNet<T>& model, const std::vector<Sample>& test_set,
                               std::size_t max_samples) {
    if (test_set.empty()) throw ContractError("evaluate: empty split");
    const auto& cfg = model.config();
    const std::size_t n = max_samples == 0 ? test_set.size()
                                           : std::min(max_samples, test_set.size());
    std::vector<SamplePrediction> all;
    std::vector<SamplePrediction> bins[3];
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& sample = test_set[i];
        Rng noise_rng = Rng::derive(kEvalNoiseSalt, i);
        const auto pose = add_pose_noise(sample.pose2d, cfg.kgc_noise_sigma, noise_rng);
        auto est = model.forward(image_to_tensor<T>(sample, cfg.image_size),
                                 pose_to_tensor<T>(pose));
        SamplePrediction p;
        p.pred_joints.assign(est.joints.values().begin(), est.joints.values().end());
        p.pred_vertices.assign(est.vertices.values().begin(), est.vertices.values().end());
        p.gt_joints.resize(sample.joints3d.size());
        p.gt_vertices.resize(sample.mesh.size());
        for (std::size_t k = 0; k < p.gt_joints.size(); ++k)
            p.gt_joints[k] = sample.joints3d[k] - sample.translation[k % 3];
        for (std::size_t k = 0; k < p.gt_vertices.size(); ++k)
            p.gt_vertices[k] = sample.mesh[k] - sample.translation[k % 3];
        const int bin = sample.occlusion_ratio < 0.25 ? 0 : (sample.occlusion_ratio < 0.5 ? 1 : 2);
        bins[bin].push_back(p);
        all.push_back(std::move(p));
    }
    EvaluationResult result;
    for (const auto& p : all) {
        const auto aligned = procrustes_align(p.pred_joints, p.gt_joints);
        for (double e : point_errors(aligned, p.gt_joints)) result.pa_joint_errors.push_back(e);
    }
    result.overall = compute_metrics(all);
    const char* bin_names[3] = {"occ_0.00_0.25", "occ_0.25_0.50", "occ_0.50_1.00"};
    for (int b = 0; b < 3; ++b)
        if (!bins[b].empty()) result.per_occlusion_bin[bin_names[b]] = compute_metrics(bins[b]);
    return result;
}

template <typename T>
TrainResult train_impl(const RunConfig& cfg, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& test_set, const std::string& out_dir) {
    check_dataset(cfg, train_set, "train");
    if (cfg.eval_subset > 0) check_dataset(cfg, test_set, "test");
    if (cfg.batch < 1 || cfg.epochs < 1) throw ContractError("trainer: batch and epochs must be >= 1");
    CheckedModeGuard guard(false); // per-op scans off in the hot loop; the loss is checked per step
    std::filesystem::create_directories(out_dir);

    HandNet<T> model(cfg);
    Adam<T> opt(model.params(), cfg.lr);

    const std::string log_path = out_dir + "/training_log.csv";
    std::ofstream csv(log_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open log: " + log_path);
    csv << "epoch,lr,train_loss," << MetricsReport::csv_header() << "\n";

    TrainResult result;
    result.log_csv = log_path;
    result.checkpoint_stem = out_dir + "/checkpoint";

    const std::size_t n = train_set.size();
    std::vector<std::size_t> order(n);
    long global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(cfg.lr_at_epoch(epoch));
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng = Rng::derive(cfg.seed ^ kShuffleSalt, static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch));
            Tensor<T> loss;
            for (std::size_t k = start; k < stop; ++k) {
                const Sample& sample = train_set[order[k]];
                Rng noise_rng = Rng::derive(cfg.seed ^ kTrainNoiseSalt,
                                            static_cast<std::uint64_t>(global_step) * 0x10001ULL + k);
                const auto pose = add_pose_noise(sample.pose2d, cfg.kgc_noise_sigma, noise_rng);
                auto est = model.forward(image_to_tensor<T>(sample, cfg.image_size),
                                         pose_to_tensor<T>(pose));
                auto targets = make_targets<T>(sample, cfg);
                auto sample_loss = training_loss(est, targets, cfg.loss_weights);
                loss = loss.defined() ? add(loss, sample_loss) : sample_loss;
            }
            loss = scale(loss, T(1) / static_cast<T>(stop - start));
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value))
                throw NumericError("trainer: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(global_step) +
                                   " (lr=" + std::to_string(opt.lr()) + ") - aborting");
            loss.backward();
            opt.step();
            opt.zero_grad();
            epoch_loss += loss_value;
            ++batches;
            ++global_step;
        }
        epoch_loss /= static_cast<double>(batches);
        result.epoch_losses.push_back(epoch_loss);

        csv << epoch << "," << opt.lr() << "," << epoch_loss << ",";
        if (cfg.eval_subset > 0) {
            auto eval = evaluate_impl(model, test_set, static_cast<std::size_t>(cfg.eval_subset));
            csv << eval.overall.csv_row();
        } else {
            csv << ",,,,,,,,";
        }
        csv << "\n";
        csv.flush();

        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
            epoch + 1 < cfg.epochs) {
            nlohmann::json meta;
            meta["config"] = config_meta(cfg);
            meta["epoch"] = epoch + 1;
            save_checkpoint(out_dir + "/checkpoint_epoch" + std::to_string(epoch + 1),
                            model.params(), meta);
        }
    }

    nlohmann::json meta;
    meta["config"] = config_meta(cfg);
    meta["epoch"] = cfg.epochs;
    save_checkpoint(result.checkpoint_stem, model.params(), meta);
    return result;
}

} // namespace

TrainResult train_model(const RunConfig& cfg, const std::vector<Sample>& train_set,
                        const std::vector<Sample>& test_set, const std::string& out_dir) {
    if (cfg.precision == "f64") return train_impl<double>(cfg, train_set, test_set, out_dir);
    if (cfg.precision == "f32") return train_impl<float>(cfg, train_set, test_set, out_dir);
    throw ContractError("trainer: precision must be f32 or f64");
}

template <typename T>
EvaluationResult evaluate_model(const HandNet<T>& model, const std::vector<Sample>& test_set,
                                std::size_t max_samples) {
    CheckedModeGuard guard(false);
    return evaluate_impl(model, test_set, max_samples);
}

template EvaluationResult evaluate_model<float>(const HandNet<float>&, const std::vector<Sample>&,
                                                std::size_t);
template EvaluationResult evaluate_model<double>(const HandNet<double>&, const std::vector<Sample>&,
                                                 std::size_t);

RunConfig config_from_checkpoint(const std::string& checkpoint_stem) {
    auto loaded = load_manifest(checkpoint_stem);
    if (loaded.meta.value("kind", "") != "checkpoint")
        throw IoError("not a checkpoint manifest: " + checkpoint_stem);
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : loaded.meta.at("config").items()) kv[k] = v.get<std::string>();
    return RunConfig::from_map(kv);
}

EvaluationResult evaluate_checkpoint(const std::string& checkpoint_stem,
                                     const std::vector<Sample>& test_set,
                                     std::size_t max_samples) {
    const RunConfig cfg = config_from_checkpoint(checkpoint_stem);
    if (cfg.precision == "f64") {
        HandNet<double> model(cfg);
        load_checkpoint(checkpoint_stem, model.params());
        return evaluate_model(model, test_set, max_samples);
    }
    HandNet<float> model(cfg);
    load_checkpoint(checkpoint_stem, model.params());
    return evaluate_model(model, test_set, max_samples);
}

std::vector<AblationRow>
run_ablation(const RunConfig& base,
             const std::vector<std::pair<std::string, std::vector<std::string>>>& axes,
             const std::string& out_dir) {
    if (axes.empty()) throw ContractError("ablation: no axes given");
    for (const auto& [key, values] : axes) {
        if (key == "seed" || key.rfind("data.", 0) == 0 || key == "model.image_size" ||
            key == "model.seed")
            throw ContractError("ablation: axis " + key + " would change the shared data");
        if (values.empty()) throw ContractError("ablation: axis " + key + " has no values");
    }

    const HandModel hand = make_hand_model(base.model_seed);
    DatasetConfig dcfg;
    dcfg.seed = base.seed;
    dcfg.n_samples = base.train_samples;
    dcfg.occlusion_level = base.occlusion_level;
    dcfg.image_size = base.image_size;
    dcfg.model_seed = base.model_seed;
    dcfg.split = "train";
    const auto train_set = generate_dataset(dcfg, hand);
    dcfg.n_samples = base.test_samples;
    dcfg.split = "test";
    const auto test_set = generate_dataset(dcfg, hand);

    // cartesian product, first axis outermost
    std::vector<std::vector<std::pair<std::string, std::string>>> combos = {{}};
    for (const auto& [key, values] : axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& combo : combos)
            for (const auto& v : values) {
                auto extended = combo;
                extended.emplace_back(key, v);
                next.push_back(std::move(extended));
            }
        combos = std::move(next);
    }

    std::vector<AblationRow> rows;
    int run_idx = 0;
    for (const auto& combo : combos) {
        RunConfig cfg = base;
        std::ostringstream label;
        for (std::size_t i = 0; i < combo.size(); ++i) {
            cfg.apply(combo[i].first, combo[i].second);
            label << (i ? ";" : "") << combo[i].first << "=" << combo[i].second;
        }
        const std::string run_dir = out_dir + "/ablation_run" + std::to_string(run_idx++);
        std::filesystem::create_directories(run_dir);
        auto train_result = train_model(cfg, train_set, test_set, run_dir);
        auto eval = evaluate_checkpoint(train_result.checkpoint_stem, test_set);
        rows.push_back(AblationRow{label.str(), eval.overall});
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "config," << MetricsReport::csv_header() << "\n";
    for (const auto& row : rows) os << "\"" << row.label << "\"," << row.report.csv_row() << "\n";
    return os.str();
}

} // namespace handmesh
