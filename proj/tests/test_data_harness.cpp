#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "handmesh/checkpoint.hpp"
#include "handmesh/config.hpp"
#include "handmesh/synth_data.hpp"
#include "handmesh/trainer.hpp"
#include "oracles.hpp"

using namespace handmesh;

namespace {

DatasetConfig small_dataset_config(std::uint64_t seed, int n, double occlusion) {
    DatasetConfig cfg;
    cfg.seed = seed;
    cfg.n_samples = n;
    cfg.occlusion_level = occlusion;
    cfg.image_size = 64;
    cfg.model_seed = 2024;
    return cfg;
}

// width-reduced run config matching the 64 px dataset above
RunConfig tiny_run_config() {
    RunConfig cfg;
    cfg.image_size = 64;
    cfg.backbone_channels = 8;
    cfg.heatmap_channels = 21;
    cfg.regressor_hidden = 16;
    cfg.cat_d_model = 8;
    cfg.cat_heads = 2;
    cfg.cat_blocks = 1;
    cfg.kgc_depth = 2;
    cfg.epochs = 2;
    cfg.batch = 4;
    cfg.eval_subset = 0;
    cfg.checkpoint_every = 0;
    return cfg;
}

bool same_bytes(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    REQUIRE(fa.good());
    REQUIRE(fb.good());
    std::vector<char> da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return da == db;
}

} // namespace

TEST_SUITE_BEGIN("synthetic data");

TEST_CASE("projection: principal point, similar triangles, ray consistency") {
    Camera cam = Camera::for_image(256);
    std::vector<double> joints(21 * 3);
    for (int j = 0; j < 21; ++j) {
        joints[static_cast<std::size_t>(3 * j)] = 0.0;
        joints[static_cast<std::size_t>(3 * j) + 1] = 0.0;
        joints[static_cast<std::size_t>(3 * j) + 2] = 600.0;
    }
    auto pose = project(joints, cam);
    CHECK(pose.joints[0][0] == doctest::Approx(cam.center_u));
    CHECK(pose.joints[0][1] == doctest::Approx(cam.center_v));

    joints[0] = 50.0;
    joints[1] = -20.0;
    auto near = project(joints, cam);
    joints[2] = 1200.0;
    auto far = project(joints, cam);
    CHECK(far.joints[0][0] - cam.center_u ==
          doctest::Approx((near.joints[0][0] - cam.center_u) / 2.0).epsilon(1e-12));
    CHECK(far.joints[0][1] - cam.center_v ==
          doctest::Approx((near.joints[0][1] - cam.center_v) / 2.0).epsilon(1e-12));

    // ray-cast oracle: walking the pixel ray to the point's depth recovers it
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> pt = {rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(300, 900)};
        std::vector<double> jpts(21 * 3);
        for (int j = 0; j < 21; ++j)
            for (int d = 0; d < 3; ++d) jpts[static_cast<std::size_t>(3 * j + d)] = pt[static_cast<std::size_t>(d)];
        auto p = project(jpts, cam);
        const double rx = (p.joints[0][0] - cam.center_u) / cam.focal;
        const double ry = (p.joints[0][1] - cam.center_v) / cam.focal;
        CHECK(std::abs(rx * pt[2] - pt[0]) < 1e-9);
        CHECK(std::abs(ry * pt[2] - pt[1]) < 1e-9);
    }

    joints[2] = -5.0;
    CHECK_THROWS_AS(project(joints, cam), NumericError);
}

TEST_CASE("same seed regenerates the dataset bit-identically") {
    auto hand = make_hand_model(2024);
    auto cfg = small_dataset_config(77, 6, 0.4);
    auto a = generate_dataset(cfg, hand);
    auto b = generate_dataset(cfg, hand);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image == b[i].image);
        CHECK(a[i].theta == b[i].theta);
        CHECK(a[i].joints3d == b[i].joints3d);
        CHECK(a[i].occlusion_mask == b[i].occlusion_mask);
        CHECK(a[i].occlusion_ratio == b[i].occlusion_ratio);
    }
    auto c = generate_dataset(small_dataset_config(78, 6, 0.4), hand);
    CHECK(c[0].image != a[0].image);
    // train/test splits are disjoint streams
    auto test_cfg = small_dataset_config(77, 6, 0.4);
    test_cfg.split = "test";
    auto d = generate_dataset(test_cfg, hand);
    CHECK(d[0].theta != a[0].theta);
}

TEST_CASE("zero occlusion level leaves masks empty") {
    auto hand = make_hand_model(2024);
    auto samples = generate_dataset(small_dataset_config(5, 8, 0.0), hand);
    for (const auto& s : samples) {
        CHECK(s.occlusion_ratio == 0.0);
        for (auto m : s.occlusion_mask) CHECK(m == 0);
    }
}

TEST_CASE("occlusion level 0.5 covers about half the hand pixels") {
    auto hand = make_hand_model(2024);
    auto samples = generate_dataset(small_dataset_config(11, 1000, 0.5), hand);
    double mean_ratio = 0.0;
    for (const auto& s : samples) {
        CHECK(s.occlusion_ratio >= 0.0);
        CHECK(s.occlusion_ratio <= 1.0);
        mean_ratio += s.occlusion_ratio / static_cast<double>(samples.size());
    }
    CHECK(mean_ratio > 0.4);
    CHECK(mean_ratio < 0.6);
}

TEST_CASE("pose2d is the exact projection of joints3d and stays in frame") {
    auto hand = make_hand_model(2024);
    auto cfg = small_dataset_config(13, 20, 0.3);
    auto samples = generate_dataset(cfg, hand);
    const Camera cam = Camera::for_image(cfg.image_size);
    for (const auto& s : samples) {
        auto reproj = project(s.joints3d, cam);
        for (int j = 0; j < 21; ++j) {
            CHECK(s.pose2d.joints[static_cast<std::size_t>(j)][0] ==
                  doctest::Approx(reproj.joints[static_cast<std::size_t>(j)][0]).epsilon(1e-12));
            CHECK(s.pose2d.joints[static_cast<std::size_t>(j)][0] >= 0.0);
            CHECK(s.pose2d.joints[static_cast<std::size_t>(j)][0] <= cfg.image_size);
            CHECK(s.pose2d.joints[static_cast<std::size_t>(j)][1] >= 0.0);
            CHECK(s.pose2d.joints[static_cast<std::size_t>(j)][1] <= cfg.image_size);
        }
        // hand-frame targets reattach to camera frame through the stored offset
        for (std::size_t i = 0; i < 9; ++i)
            CHECK(s.joints3d[i] - s.translation[i % 3] ==
                  doctest::Approx(s.joints3d[i] - s.translation[i % 3]));
    }
}

TEST_CASE("dataset round-trips through the manifest format bit-exactly") {
    auto hand = make_hand_model(2024);
    auto cfg = small_dataset_config(21, 4, 0.5);
    auto samples = generate_dataset(cfg, hand);
    save_dataset("ds_roundtrip", cfg, samples);
    auto loaded = load_dataset("ds_roundtrip");
    CHECK(loaded.config.seed == cfg.seed);
    CHECK(loaded.config.n_samples == cfg.n_samples);
    REQUIRE(loaded.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded.samples[i].image == samples[i].image);
        CHECK(loaded.samples[i].theta == samples[i].theta);
        CHECK(loaded.samples[i].beta == samples[i].beta);
        CHECK(loaded.samples[i].joints3d == samples[i].joints3d);
        CHECK(loaded.samples[i].mesh == samples[i].mesh);
        CHECK(loaded.samples[i].translation == samples[i].translation);
        CHECK(loaded.samples[i].occlusion_mask == samples[i].occlusion_mask);
        CHECK(loaded.samples[i].occlusion_ratio == samples[i].occlusion_ratio);
    }
    // regeneration from the stored manifest config matches as well
    auto regen = generate_dataset(loaded.config, hand);
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(regen[i].image == samples[i].image);
}

TEST_CASE("ppm export writes a well-formed file") {
    auto hand = make_hand_model(2024);
    auto samples = generate_dataset(small_dataset_config(3, 1, 0.2), hand);
    write_ppm("sample0.ppm", samples[0].image, 64);
    std::ifstream f("sample0.ppm", std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    CHECK(magic == "P6");
    CHECK(w == 64);
    CHECK(h == 64);
    CHECK(maxval == 255);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults carry the reference protocol") {
    RunConfig cfg;
    CHECK(cfg.batch == 32);
    CHECK(cfg.epochs == 70);
    CHECK(cfg.lr == doctest::Approx(1e-4));
    CHECK(cfg.decay_factor == doctest::Approx(0.7));
    CHECK(cfg.decay_every == 10);
    CHECK(cfg.kgc_depth == 4);
    CHECK(cfg.cat_blocks == 2);
}

TEST_CASE("lr schedule scales by the decay factor every tenth epoch") {
    RunConfig cfg;
    CHECK(cfg.lr_at_epoch(0) == doctest::Approx(1e-4));
    CHECK(cfg.lr_at_epoch(9) == doctest::Approx(1e-4));
    CHECK(cfg.lr_at_epoch(10) == doctest::Approx(1e-4 * 0.7));
    CHECK(cfg.lr_at_epoch(20) == doctest::Approx(1e-4 * 0.49));
    cfg.decay_every = 0;
    CHECK(cfg.lr_at_epoch(300) == doctest::Approx(1e-4));
}

TEST_CASE("key=value text round-trips and rejects junk") {
    RunConfig cfg = RunConfig::desk_profile();
    cfg.kgc_widths = {8, 16, 64};
    cfg.cat_variant = "plain_transformer";
    cfg.loss_weights.joints = 2.5;
    auto text = cfg.to_text();
    auto back = RunConfig::from_text(text);
    CHECK(back.to_map() == cfg.to_map());

    auto parsed = RunConfig::from_text("# comment\n kgc.depth = 3 \n\noptimizer.lr=0.01\n");
    CHECK(parsed.kgc_depth == 3);
    CHECK(parsed.lr == doctest::Approx(0.01));
    CHECK_THROWS_AS(RunConfig::from_text("bogus.key = 1\n"), ContractError);
    CHECK_THROWS_AS(RunConfig::from_text("kgc.depth == huh\n"), ContractError);
    CHECK_THROWS_AS(RunConfig::from_text("just a line\n"), ContractError);
}

TEST_CASE("desk profile shrinks data, widths, and epochs") {
    auto cfg = RunConfig::desk_profile();
    CHECK(cfg.train_samples == 2000);
    CHECK(cfg.test_samples == 500);
    CHECK(cfg.epochs == 10);
    CHECK(cfg.image_size == 64);
    CHECK(cfg.backbone_channels < 256);
    CHECK(cfg.lr == doctest::Approx(1e-4));
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("trainer");

TEST_CASE("identical seeds give identical loss curves and checkpoints") {
    auto hand = make_hand_model(2024);
    auto data_cfg = small_dataset_config(31, 8, 0.3);
    auto train_set = generate_dataset(data_cfg, hand);
    auto cfg = tiny_run_config();
    std::filesystem::create_directories("run_det_a");
    std::filesystem::create_directories("run_det_b");
    auto r1 = train_model(cfg, train_set, {}, "run_det_a");
    auto r2 = train_model(cfg, train_set, {}, "run_det_b");
    CHECK(r1.epoch_losses == r2.epoch_losses);
    CHECK(same_bytes("run_det_a/checkpoint.bin", "run_det_b/checkpoint.bin"));
    CHECK(same_bytes("run_det_a/checkpoint.json", "run_det_b/checkpoint.json"));
    CHECK(same_bytes(r1.log_csv, r2.log_csv));

    RunConfig other = cfg;
    other.seed = 999;
    std::filesystem::create_directories("run_det_c");
    auto r3 = train_model(other, train_set, {}, "run_det_c");
    CHECK(r3.epoch_losses != r1.epoch_losses);
}

TEST_CASE("checkpoint round-trip: reloaded model scores identically") {
    auto hand = make_hand_model(2024);
    auto train_set = generate_dataset(small_dataset_config(37, 8, 0.4), hand);
    auto test_set = generate_dataset([&] {
        auto c = small_dataset_config(37, 6, 0.4);
        c.split = "test";
        return c;
    }(), hand);
    auto cfg = tiny_run_config();
    std::filesystem::create_directories("run_ckpt");
    auto result = train_model(cfg, train_set, test_set, "run_ckpt");

    HandNet<float> model(cfg);
    load_checkpoint(result.checkpoint_stem, model.params());
    auto live = evaluate_model(model, test_set);
    auto reloaded = evaluate_checkpoint(result.checkpoint_stem, test_set);
    CHECK(live.overall.mpjpe_mm == reloaded.overall.mpjpe_mm);
    CHECK(live.overall.pa_mpjpe_mm == reloaded.overall.pa_mpjpe_mm);
    CHECK(live.overall.f_at_5 == reloaded.overall.f_at_5);
    CHECK(reloaded.overall.pa_mpjpe_mm <= reloaded.overall.mpjpe_mm + 1e-9);
    CHECK(reloaded.overall.pa_mpvpe_mm <= reloaded.overall.mpvpe_mm + 1e-9);
}

TEST_CASE("per-occlusion-bin breakdown appears for mixed splits") {
    auto hand = make_hand_model(2024);
    std::vector<Sample> mixed;
    for (double level : {0.1, 0.4, 0.7}) {
        auto cfg = small_dataset_config(41, 4, level);
        cfg.split = level < 0.2 ? "a" : (level < 0.5 ? "b" : "c");
        for (auto& s : generate_dataset(cfg, hand)) mixed.push_back(std::move(s));
    }
    auto cfg = tiny_run_config();
    cfg.epochs = 1;
    HandNet<float> model(cfg);
    auto eval = evaluate_model(model, mixed);
    CHECK(eval.per_occlusion_bin.size() >= 2);
    for (const auto& [bin, report] : eval.per_occlusion_bin) {
        CHECK(report.sample_count > 0);
        CHECK(report.pa_mpjpe_mm <= report.mpjpe_mm + 1e-9);
    }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    auto hand = make_hand_model(2024);
    auto train_set = generate_dataset(small_dataset_config(43, 4, 0.2), hand);
    auto cfg = tiny_run_config();
    cfg.lr = 1e30; // explodes within a couple of steps
    cfg.epochs = 50;
    std::filesystem::create_directories("run_nan");
    CHECK_THROWS_AS(train_model(cfg, train_set, {}, "run_nan"), NumericError);
}

TEST_CASE("missing dataset is rejected up front") {
    auto cfg = tiny_run_config();
    CHECK_THROWS_AS(train_model(cfg, {}, {}, "run_missing"), ContractError);
}

TEST_CASE("ablation grid: one populated row per config, determinism across rows") {
    RunConfig base = tiny_run_config();
    base.train_samples = 6;
    base.test_samples = 4;
    base.epochs = 1;
    base.occlusion_level = 0.3;
    std::filesystem::create_directories("run_ablate");
    auto rows = run_ablation(base, {{"kgc.depth", {"1", "2"}}}, "run_ablate");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "kgc.depth=1");
    CHECK(rows[1].label == "kgc.depth=2");
    for (const auto& row : rows) {
        CHECK(row.report.sample_count == 4);
        CHECK(row.report.mpjpe_mm > 0.0);
        CHECK(row.report.auc_pck >= 0.0);
    }
    auto twice = run_ablation(base, {{"cat.blocks", {"1", "1"}}}, "run_ablate2");
    REQUIRE(twice.size() == 2);
    CHECK(twice[0].report.mpjpe_mm == twice[1].report.mpjpe_mm);

    CHECK_THROWS_AS(run_ablation(base, {{"data.train_samples", {"4"}}}, "run_ablate3"),
                    ContractError);
    auto csv = ablation_csv(rows);
    CHECK(csv.find("config,mpjpe_mm") == 0);
    CHECK(csv.find("kgc.depth=1") != std::string::npos);
}

TEST_SUITE_END();
