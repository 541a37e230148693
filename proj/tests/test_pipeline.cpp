#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "splatprune/pipeline.hpp"
#include "splatprune/toy_scene.hpp"
#include "support.hpp"

using namespace splat;

namespace {

SensitivityScores plain_scores(std::vector<double> values) {
    SensitivityScores s;
    s.scores = std::move(values);
    return s;
}

GaussianCloud uniform_cloud(int n) {
    GaussianCloud cloud;
    for (int i = 0; i < n; ++i) {
        cloud.positions.push_back(Vec3(i, 0, 0));
        cloud.log_scales.push_back(Vec3::Zero());
        cloud.rotations.push_back(Vec4(1, 0, 0, 0));
        cloud.base_colors.push_back(Vec3::Zero());
        cloud.raw_opacities.push_back(0.0);
    }
    return cloud;
}

SceneBundle small_toy(std::uint64_t seed, int signal, int clutter, int views, int res) {
    ToySceneSpec spec;
    spec.signal_count = signal;
    spec.clutter_count = clutter;
    spec.view_count = views;
    spec.resolution = res;
    spec.seed = seed;
    return generate_toy_scene(spec);
}

bool clouds_identical(const GaussianCloud& a, const GaussianCloud& b) {
    if (a.size() != b.size() || a.sh_rest != b.sh_rest ||
        a.raw_opacities != b.raw_opacities) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.positions[i] != b.positions[i] || a.log_scales[i] != b.log_scales[i] ||
            a.rotations[i] != b.rotations[i] || a.base_colors[i] != b.base_colors[i]) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("prune_once removes the lowest-scoring gaussians") {
    const GaussianCloud cloud = uniform_cloud(3);
    auto [pruned, removed] = prune_once(cloud, plain_scores({3, 1, 2}), 1.0 / 3.0);
    CHECK(removed == std::vector<int>{1});
    CHECK(pruned.size() == 2);
    CHECK(pruned.positions[0][0] == 0.0);
    CHECK(pruned.positions[1][0] == 2.0); // relative order preserved

    auto [unchanged, none] = prune_once(cloud, plain_scores({3, 1, 2}), 0.0);
    CHECK(none.empty());
    CHECK(unchanged.size() == 3);

    CHECK_THROWS_AS(prune_once(cloud, plain_scores({1, 2}), 0.5), ShapeError);
    CHECK_THROWS_AS(prune_once(cloud, plain_scores({3, 1, 2}), 1.0), InvalidParameterError);
}

TEST_CASE("prune floor arithmetic: 1000 -> 200 -> 100") {
    GaussianCloud cloud = uniform_cloud(1000);
    std::vector<double> scores(1000);
    for (int i = 0; i < 1000; ++i) {
        scores[i] = i;
    }
    auto [after80, removed80] = prune_once(cloud, plain_scores(scores), 0.8);
    CHECK(after80.size() == 200);
    CHECK(removed80.size() == 800);
    std::vector<double> second(after80.size());
    for (std::size_t i = 0; i < second.size(); ++i) {
        second[i] = static_cast<double>(i);
    }
    auto [after50, removed50] = prune_once(after80, plain_scores(second), 0.5);
    CHECK(after50.size() == 100);
}

TEST_CASE("prune ties break by ascending opacity then index") {
    GaussianCloud cloud = uniform_cloud(4);
    cloud.raw_opacities = {0.5, -1.0, 0.5, -1.0}; // two low, two high
    auto [pruned, removed] = prune_once(cloud, plain_scores({1, 1, 1, 1}), 0.5);
    CHECK(removed == std::vector<int>{1, 3}); // lowest opacity first, then index
    (void)pruned;
}

TEST_CASE("refine no-ops leave the cloud bit-identical") {
    SceneBundle bundle = small_toy(21, 8, 4, 3, 32);
    GaussianCloud cloud = bundle.cloud;

    refine(cloud, bundle.views, 0, {}, 0.2, 1, bundle.scene_extent);
    CHECK(clouds_identical(cloud, bundle.cloud));

    OptimizerConfig zeros;
    zeros.position_lr = zeros.log_scale_lr = zeros.rotation_lr = zeros.color_lr =
        zeros.opacity_lr = 0.0;
    refine(cloud, bundle.views, 5, zeros, 0.2, 1, bundle.scene_extent);
    CHECK(clouds_identical(cloud, bundle.cloud));

    std::vector<CameraView> no_gt = bundle.views;
    no_gt[0].gt_image.reset();
    CHECK_THROWS_AS(refine(cloud, no_gt, 1, {}, 0.2, 1), InvalidParameterError);
}

TEST_CASE("refine is deterministic in the seed") {
    SceneBundle bundle = small_toy(22, 8, 4, 3, 32);
    GaussianCloud a = bundle.cloud;
    GaussianCloud b = bundle.cloud;
    refine(a, bundle.views, 20, {}, 0.2, 7, bundle.scene_extent);
    refine(b, bundle.views, 20, {}, 0.2, 7, bundle.scene_extent);
    CHECK(clouds_identical(a, b));
}

TEST_CASE("refine recovers PSNR after a prune") {
    SceneBundle bundle = small_toy(23, 32, 16, 6, 48);
    AccumulateOptions acc;
    acc.divisor = 4;
    const SensitivityScores scores =
        compute_scores(bundle.cloud, bundle.views, Scorer::MeanScale, acc, 0);
    auto [pruned, removed] = prune_once(bundle.cloud, scores, 0.3);
    const double before = evaluate_views(pruned, bundle.views, 1).psnr_db;
    RefineStats stats = refine(pruned, bundle.views, 500, {}, 0.2, 3, bundle.scene_extent);
    const double after = evaluate_views(pruned, bundle.views, 1).psnr_db;
    CHECK(after > before);
    CHECK(stats.last_loss < stats.first_loss);
}

TEST_CASE("run_pipeline with no rounds is the identity") {
    SceneBundle bundle = small_toy(24, 6, 2, 2, 32);
    PruneConfig config;
    config.collect_metrics = false;
    auto [cloud, report] = run_pipeline(bundle.cloud, bundle.views, config);
    CHECK(clouds_identical(cloud, bundle.cloud));
    CHECK(report.rounds.empty());
    CHECK(report.cumulative_percent == 0.0);
    CHECK(report.initial_count == report.final_count);
}

TEST_CASE("run_pipeline 80+50 keeps 10 percent with disjoint removal sets") {
    SceneBundle bundle = small_toy(25, 30, 10, 4, 32);
    PruneConfig config;
    config.collect_metrics = false;
    config.deterministic = true;
    RoundConfig r1;
    r1.percent = 0.8;
    r1.divisor = 4;
    RoundConfig r2 = r1;
    r2.percent = 0.5;
    config.rounds = {r1, r2};
    auto [cloud, report] = run_pipeline(bundle.cloud, bundle.views, config);
    CHECK(cloud.size() == 4); // 40 -> 8 -> 4
    CHECK(report.cumulative_percent == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(report.rounds[0].removed_count + report.rounds[0].kept_count == 40);
    CHECK(report.rounds[1].removed_count + report.rounds[1].kept_count == 8);

    // Removal sets are disjoint in original ids and never include survivors.
    std::vector<char> seen(40, 0);
    for (const RoundReport& rr : report.rounds) {
        for (int idx : rr.removed_original_indices) {
            CHECK(!seen[idx]);
            seen[idx] = 1;
        }
    }
    long total_removed = 0;
    for (char s : seen) {
        total_removed += s;
    }
    CHECK(total_removed == 36);

    const nlohmann::json j = report_to_json(report);
    CHECK(j.at("rounds").size() == 2);
    CHECK(j.at("cumulative_percent").get<double>() == doctest::Approx(0.9));
}

TEST_CASE("report cumulative percent uses the configured-round product") {
    PruneConfig config;
    for (double p : {0.37, 0.21, 0.44}) {
        RoundConfig r;
        r.percent = p;
        config.rounds.push_back(r);
    }
    config.collect_metrics = false;
    SceneBundle bundle = small_toy(26, 10, 0, 2, 32);
    auto [cloud, report] = run_pipeline(bundle.cloud, bundle.views, config);
    (void)cloud;
    const double expected = 1.0 - (1.0 - 0.37) * (1.0 - 0.21) * (1.0 - 0.44);
    CHECK(std::abs(report.cumulative_percent - expected) < 1e-9);
}

TEST_CASE("pruning zero-hit gaussians leaves training renders bit-identical") {
    SceneBundle bundle = small_toy(27, 20, 20, 5, 32);
    const auto hits = count_hits(bundle.cloud, bundle.views, 1);
    std::vector<int> keep;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (hits[i] > 0) {
            keep.push_back(static_cast<int>(i));
        }
    }
    REQUIRE(keep.size() < bundle.cloud.size()); // transparent clutter never contributes
    const GaussianCloud pruned = bundle.cloud.subset(keep);
    for (const CameraView& view : bundle.views) {
        const RenderedImage full = render_view(bundle.cloud, view, 1);
        const RenderedImage less = render_view(pruned, view, 1);
        CHECK(full.rgb.data == less.rgb.data);
        CHECK(full.final_transmittance == less.final_transmittance);
    }
}

TEST_CASE("sweep 1x1 grid matches a single pipeline run; (0,0) is refine-only") {
    SceneBundle bundle = small_toy(28, 12, 6, 3, 32);
    PruneConfig base;
    base.collect_metrics = false;
    base.scene_extent = bundle.scene_extent;

    const SweepResult grid =
        sweep_percentages(bundle.cloud, bundle.views, {0.5}, {0.25}, 10, base);
    PruneConfig manual = base;
    RoundConfig r1;
    r1.percent = 0.5;
    r1.refine_iters = 10;
    RoundConfig r2 = r1;
    r2.percent = 0.25;
    manual.rounds = {r1, r2};
    auto [cloud, report] = run_pipeline(bundle.cloud, bundle.views, manual);
    (void)report;
    const MetricsRecord m = evaluate_views(cloud, bundle.views, 1);
    CHECK(grid.psnr[0] == doctest::Approx(m.psnr_db).epsilon(1e-12));
    CHECK(grid.ssim[0] == doctest::Approx(m.ssim).epsilon(1e-12));

    const SweepResult zero = sweep_percentages(bundle.cloud, bundle.views, {0.0}, {0.0}, 10, base);
    PruneConfig refine_only = base;
    RoundConfig z;
    z.percent = 0.0;
    z.refine_iters = 10;
    refine_only.rounds = {z, z};
    auto [ref_cloud, ref_report] = run_pipeline(bundle.cloud, bundle.views, refine_only);
    (void)ref_report;
    const MetricsRecord zm = evaluate_views(ref_cloud, bundle.views, 1);
    CHECK(zero.psnr[0] == doctest::Approx(zm.psnr_db).epsilon(1e-12));
}

TEST_CASE("pipeline config validation") {
    PruneConfig config;
    RoundConfig bad;
    bad.percent = 1.0;
    config.rounds = {bad};
    CHECK_THROWS_AS(config.validate(), InvalidParameterError);
    config.rounds.clear();
    config.lambda_ssim = 1.0;
    CHECK_THROWS_AS(config.validate(), InvalidParameterError);
}
