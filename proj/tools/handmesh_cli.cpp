// Command-line front end: dataset generation, training, evaluation, ablation
// sweeps, and a double-precision gradient self-check.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "handmesh/checkpoint.hpp"
#include "handmesh/config.hpp"
#include "handmesh/synth_data.hpp"
#include "handmesh/trainer.hpp"

namespace hm = handmesh;

namespace {

struct ConfigCli {
    std::string config_file;
    std::string profile = "desk";
    std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigCli& cc) {
    cmd->add_option("--config", cc.config_file, "config file of key = value lines");
    cmd->add_option("--profile", cc.profile, "base profile: desk (CI-sized) or full (reference width)")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--set", cc.sets, "override a config key, e.g. --set kgc.depth=3")
        ->take_all();
}

hm::RunConfig resolve_config(const ConfigCli& cc) {
    hm::RunConfig cfg = cc.profile == "full" ? hm::RunConfig() : hm::RunConfig::desk_profile();
    if (!cc.config_file.empty()) {
        // file contents replace the profile entirely, then --set applies on top
        cfg = hm::RunConfig::from_file(cc.config_file);
    }
    for (const auto& kv : cc.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw hm::ContractError("--set needs key=value, got: " + kv);
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

hm::LoadedDataset load_split(const std::string& stem, const hm::RunConfig& cfg) {
    auto data = hm::load_dataset(stem);
    if (data.config.image_size != cfg.image_size)
        throw hm::ContractError("dataset " + stem + " was generated at image_size " +
                                std::to_string(data.config.image_size) +
                                " but the run expects " + std::to_string(cfg.image_size));
    return data;
}

std::vector<std::pair<std::string, std::vector<std::string>>>
parse_sweeps(const std::vector<std::string>& sweeps) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& sweep : sweeps) {
        const auto eq = sweep.find('=');
        if (eq == std::string::npos)
            throw hm::ContractError("--sweep needs key=v1,v2,..., got: " + sweep);
        std::vector<std::string> values;
        std::stringstream ss(sweep.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
        axes.emplace_back(sweep.substr(0, eq), std::move(values));
    }
    return axes;
}

// --- gradient self-check ------------------------------------------------------

double fd_worst_gap(std::vector<hm::Tensor<double>> leaves,
                    const std::function<hm::Tensor<double>()>& loss_fn, int coords_per_leaf,
                    hm::Rng& rng) {
    for (auto& leaf : leaves) leaf.zero_grad();
    auto loss = loss_fn();
    loss.backward();
    std::vector<std::vector<double>> autodiff;
    for (const auto& leaf : leaves) autodiff.push_back(leaf.grad());
    double worst = 0.0;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto& vals = leaves[l].values();
        const int n = static_cast<int>(vals.size());
        for (int c = 0; c < std::min(coords_per_leaf, n); ++c) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
            const double saved = vals[i];
            const double h = 1e-6 * std::max(1.0, std::abs(saved));
            vals[i] = saved + h;
            const double fp = loss_fn().item();
            vals[i] = saved - h;
            const double fm = loss_fn().item();
            vals[i] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double gap = std::abs(autodiff[l][i] - fd) /
                               std::max({1.0, std::abs(autodiff[l][i]), std::abs(fd)});
            worst = std::max(worst, gap);
        }
    }
    return worst;
}

hm::Tensor<double> random_leaf(hm::Shape shape, hm::Rng& rng, double span = 1.0) {
    std::vector<double> data(hm::shape_numel(shape));
    for (auto& v : data) v = rng.uniform(-span, span);
    return hm::Tensor<double>::from_vector(std::move(data), std::move(shape), true);
}

int run_gradcheck(int seeds, double tolerance) {
    using hm::Tensor;
    bool all_ok = true;
    auto report = [&](const std::string& name, double worst) {
        const bool ok = worst < tolerance;
        all_ok = all_ok && ok;
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "  worst rel gap " << worst << "\n";
    };

    double worst;

    worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        hm::Rng rng(static_cast<std::uint64_t>(s));
        auto a = random_leaf({4, 5}, rng);
        auto b = random_leaf({5, 3}, rng);
        auto w = random_leaf({4, 3}, rng);
        worst = std::max(worst, fd_worst_gap({a, b}, [&] { return hm::sum(hm::mul(hm::matmul(a, b), w)); }, 16, rng));
    }
    report("matmul", worst);

    worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        hm::Rng rng(100 + static_cast<std::uint64_t>(s));
        auto x = random_leaf({2, 6, 6}, rng);
        auto k = random_leaf({3, 2, 3, 3}, rng);
        auto bias = random_leaf({3}, rng);
        auto w = random_leaf({3, 3, 3}, rng);
        worst = std::max(worst, fd_worst_gap({x, k, bias}, [&] {
            return hm::mean(hm::mul(hm::conv2d(x, k, bias, 2, 1), w));
        }, 12, rng));
    }
    report("conv2d (3x3, stride 2)", worst);

    worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        hm::Rng rng(200 + static_cast<std::uint64_t>(s));
        auto x = random_leaf({4, 6}, rng);
        auto w = random_leaf({4, 6}, rng);
        worst = std::max(worst, fd_worst_gap({x}, [&] { return hm::sum(hm::mul(hm::softmax(x, 1), w)); }, 12, rng));
    }
    report("softmax", worst);

    worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        hm::Rng rng(300 + static_cast<std::uint64_t>(s));
        auto a = random_leaf({3, 4}, rng);
        auto b = random_leaf({3, 4}, rng);
        worst = std::max(worst, fd_worst_gap({a, b}, [&] {
            return hm::mse_loss(hm::relu(hm::add(a, b)), hm::mul(a, b));
        }, 12, rng));
    }
    report("elementwise/mse", worst);

    worst = 0.0;
    auto graph = hm::build_hand_skeleton();
    for (int s = 0; s < seeds; ++s) {
        hm::ParamSet<double> params(static_cast<std::uint64_t>(s));
        hm::ChebGraphConv<double> layer(params, "g", graph, 3, 3, 4);
        hm::Rng rng(400 + static_cast<std::uint64_t>(s));
        auto f = random_leaf({21, 3}, rng);
        auto w = random_leaf({21, 4}, rng);
        std::vector<Tensor<double>> leaves = {f};
        for (auto& [n, t] : params.entries()) leaves.push_back(t);
        worst = std::max(worst, fd_worst_gap(leaves, [&] { return hm::sum(hm::mul(layer.forward(f), w)); }, 8, rng));
    }
    report("chebyshev graph conv", worst);

    worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        hm::Rng rng(500 + static_cast<std::uint64_t>(s));
        auto axis = random_leaf({3}, rng, 2.0);
        auto w = random_leaf({3, 3}, rng);
        worst = std::max(worst, fd_worst_gap({axis}, [&] { return hm::sum(hm::mul(hm::rodrigues(axis), w)); }, 3, rng));
    }
    report("rodrigues", worst);

    worst = 0.0;
    auto hand = hm::make_hand_model(2024);
    for (int s = 0; s < std::min(seeds, 5); ++s) {
        hm::Rng rng(600 + static_cast<std::uint64_t>(s));
        auto theta = random_leaf({48}, rng, 0.5);
        auto beta = random_leaf({10}, rng, 1.0);
        auto wj = random_leaf({21, 3}, rng, 0.01);
        worst = std::max(worst, fd_worst_gap({theta, beta}, [&] {
            return hm::sum(hm::mul(hm::lbs_forward(hand, theta, beta).joints, wj));
        }, 8, rng));
    }
    report("linear blend skinning", worst);

    worst = 0.0;
    for (int s = 0; s < std::min(seeds, 5); ++s) {
        hm::RunConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(s);
        cfg.image_size = 32;
        cfg.backbone_channels = 8;
        cfg.heatmap_channels = 21;
        cfg.regressor_hidden = 12;
        cfg.cat_d_model = 8;
        cfg.cat_heads = 2;
        cfg.cat_blocks = 1;
        cfg.kgc_depth = 2;
        hm::HandNet<double> model(cfg);
        hm::Rng rng(700 + static_cast<std::uint64_t>(s));
        auto image = random_leaf({3, 32, 32}, rng, 0.5);
        auto pose = random_leaf({21, 2}, rng, 16.0);
        std::vector<Tensor<double>> leaves = {image, pose};
        for (auto& [n, t] : model.params().entries()) leaves.push_back(t);
        auto wj = random_leaf({21, 3}, rng, 0.01);
        worst = std::max(worst, fd_worst_gap(leaves, [&] {
            auto est = model.forward(image, pose);
            return hm::add(hm::mean(est.heatmaps), hm::sum(hm::mul(est.joints, wj)));
        }, 2, rng));
    }
    report("end-to-end reduced pipeline", worst);

    std::cout << (all_ok ? "gradient check: PASS" : "gradient check: FAIL") << "\n";
    return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"occlusion-robust 3D hand mesh reconstruction toolkit"};
    app.require_subcommand(1);

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "write a synthetic dataset split");
    std::string gen_out = "dataset";
    std::uint64_t gen_seed = 1, gen_model_seed = 2024;
    int gen_samples = 100, gen_image = 64;
    double gen_occl = 0.5;
    std::string gen_split = "train", gen_ppm_dir;
    gen->add_option("--out", gen_out, "output stem (<stem>.json + <stem>.bin)")->required();
    gen->add_option("--seed", gen_seed, "dataset seed");
    gen->add_option("--samples", gen_samples, "sample count")->check(CLI::PositiveNumber);
    gen->add_option("--occlusion", gen_occl, "target fraction of hand pixels covered")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--image-size", gen_image, "square image side (multiple of 8)");
    gen->add_option("--split", gen_split, "split salt, e.g. train or test");
    gen->add_option("--model-seed", gen_model_seed, "hand model seed");
    gen->add_option("--export-ppm", gen_ppm_dir, "also write one PPM per sample into this directory");

    // train
    auto* train = app.add_subcommand("train", "train a model on a generated dataset");
    ConfigCli train_cc;
    std::string train_data, train_test_data, train_out = "run";
    add_config_options(train, train_cc);
    train->add_option("--data", train_data, "training split stem")->required();
    train->add_option("--test-data", train_test_data, "test split stem for per-epoch metrics");
    train->add_option("--out", train_out, "output directory");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_json, eval_csv, eval_pck;
    std::size_t eval_max = 0;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint stem")->required();
    eval->add_option("--data", eval_data, "dataset split stem")->required();
    eval->add_option("--out", eval_json, "write the report as JSON here");
    eval->add_option("--csv", eval_csv, "write the report as a CSV row here");
    eval->add_option("--pck", eval_pck, "write the joint PCK curve as CSV here");
    eval->add_option("--max-samples", eval_max, "cap the number of scored samples");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train/evaluate a grid of configs on shared data");
    ConfigCli ablate_cc;
    std::string ablate_out = "ablation";
    std::vector<std::string> ablate_sweeps;
    add_config_options(ablate, ablate_cc);
    ablate->add_option("--out", ablate_out, "output directory (CSV lands at <out>/ablation.csv)");
    ablate->add_option("--sweep", ablate_sweeps, "axis as key=v1,v2,... (repeatable)")
        ->required()
        ->take_all();

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient self-check (64-bit)");
    int grad_seeds = 20;
    double grad_tol = 1e-4;
    grad->add_option("--seeds", grad_seeds, "random seeds per op")->check(CLI::PositiveNumber);
    grad->add_option("--tolerance", grad_tol, "relative tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            hm::DatasetConfig cfg;
            cfg.seed = gen_seed;
            cfg.n_samples = gen_samples;
            cfg.occlusion_level = gen_occl;
            cfg.image_size = gen_image;
            cfg.model_seed = gen_model_seed;
            cfg.split = gen_split;
            auto hand = hm::make_hand_model(cfg.model_seed);
            auto samples = hm::generate_dataset(cfg, hand);
            if (const auto dir = std::filesystem::path(gen_out).parent_path(); !dir.empty())
                std::filesystem::create_directories(dir);
            hm::save_dataset(gen_out, cfg, samples);
            if (!gen_ppm_dir.empty()) {
                std::filesystem::create_directories(gen_ppm_dir);
                for (std::size_t i = 0; i < samples.size(); ++i)
                    hm::write_ppm(gen_ppm_dir + "/sample" + std::to_string(i) + ".ppm",
                                  samples[i].image, cfg.image_size);
            }
            std::cout << "wrote " << samples.size() << " samples to " << gen_out << ".{json,bin}\n";
        } else if (*train) {
            auto cfg = resolve_config(train_cc);
            auto data = load_split(train_data, cfg);
            std::vector<hm::Sample> test;
            if (!train_test_data.empty()) {
                test = load_split(train_test_data, cfg).samples;
            } else {
                cfg.eval_subset = 0;
            }
            std::filesystem::create_directories(train_out);
            {
                std::ofstream cfg_out(train_out + "/config.txt", std::ios::trunc);
                cfg_out << cfg.to_text();
            }
            auto result = hm::train_model(cfg, data.samples, test, train_out);
            std::cout << "trained " << cfg.epochs << " epochs; final loss "
                      << result.epoch_losses.back() << "\n"
                      << "checkpoint: " << result.checkpoint_stem << ".{json,bin}\n"
                      << "log: " << result.log_csv << "\n";
        } else if (*eval) {
            auto cfg = hm::config_from_checkpoint(eval_ckpt);
            auto data = load_split(eval_data, cfg);
            auto result = hm::evaluate_checkpoint(eval_ckpt, data.samples, eval_max);
            nlohmann::json out;
            out["overall"] = result.overall.to_json();
            for (const auto& [bin, report] : result.per_occlusion_bin)
                out["occlusion_bins"][bin] = report.to_json();
            std::cout << out.dump(2) << "\n";
            if (!eval_json.empty()) {
                std::ofstream f(eval_json, std::ios::trunc);
                f << out.dump(2) << "\n";
            }
            if (!eval_csv.empty()) {
                std::ofstream f(eval_csv, std::ios::trunc);
                f << hm::MetricsReport::csv_header() << "\n" << result.overall.csv_row() << "\n";
            }
            if (!eval_pck.empty()) {
                auto curve = hm::pck_curve(result.pa_joint_errors);
                std::ofstream f(eval_pck, std::ios::trunc);
                f << "threshold_mm,fraction\n";
                for (const auto& [tau, frac] : curve) f << tau << "," << frac << "\n";
            }
        } else if (*ablate) {
            auto cfg = resolve_config(ablate_cc);
            auto axes = parse_sweeps(ablate_sweeps);
            std::filesystem::create_directories(ablate_out);
            auto rows = hm::run_ablation(cfg, axes, ablate_out);
            const auto csv = hm::ablation_csv(rows);
            std::ofstream f(ablate_out + "/ablation.csv", std::ios::trunc);
            f << csv;
            std::cout << csv;
        } else if (*grad) {
            return run_gradcheck(grad_seeds, grad_tol);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
