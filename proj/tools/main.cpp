#include "splatprune/dataset.hpp"
#include "splatprune/gradients.hpp"
#include "splatprune/image_io.hpp"
#include "splatprune/metrics.hpp"
#include "splatprune/pipeline.hpp"
#include "splatprune/ply_io.hpp"
#include "splatprune/toy_scene.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using namespace splat;

namespace {

struct CommonOptions {
    std::string scene_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool needs_scene = true) {
    if (needs_scene) {
        cmd->add_option("--scene", opts.scene_dir, "Scene directory")->required();
    }
    cmd->add_option("--seed", opts.seed, "Random seed");
    cmd->add_option("--threads", opts.threads, "Worker threads (0 = hardware)");
    cmd->add_flag("--deterministic", opts.deterministic,
                  "Serial reductions and zeroed timings for byte-reproducible output");
}

SceneBundle load_bundle(const CommonOptions& opts) { return load_scene(opts.scene_dir); }

RenderConfig render_config_for(const SceneBundle& bundle) {
    RenderConfig cfg;
    cfg.background = bundle.background;
    return cfg;
}

std::vector<double> parse_percent_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream stream(csv);
    std::string item;
    while (std::getline(stream, item, ',')) {
        out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream stream(csv);
    std::string item;
    while (std::getline(stream, item, ',')) {
        out.push_back(std::stoi(item));
    }
    return out;
}

void write_grid_csv(const std::string& path, const std::vector<double>& rows,
                    const std::vector<double>& cols, const std::vector<double>& cells) {
    std::ostringstream out;
    out << "p1\\p2";
    for (double c : cols) {
        out << "," << c;
    }
    out << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << rows[i];
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out << "," << cells[i * cols.size() + j];
        }
        out << "\n";
    }
    write_text_atomic(path, out.str());
}

void print_stage_row(const char* stage, double psnr_db, double ssim_value, double fps,
                     long count, double size_mb) {
    if (fps > 0.0) {
        std::printf("%-18s %8.2f %8.4f %9.1f %10ld %10.2f\n", stage, psnr_db, ssim_value, fps,
                    count, size_mb);
    } else {
        std::printf("%-18s %8.2f %8.4f %9s %10ld %10.2f\n", stage, psnr_db, ssim_value, "-",
                    count, size_mb);
    }
}

int run_synth(const CommonOptions& common, const ToySceneSpec& spec, const std::string& out_dir) {
    const SceneBundle bundle = generate_toy_scene(spec);
    save_scene(bundle, out_dir);
    std::printf("wrote %s: %zu gaussians, %zu views, %dx%d\n", out_dir.c_str(),
                bundle.cloud.size(), bundle.views.size(), spec.resolution, spec.resolution);
    (void)common;
    return 0;
}

int run_pipeline_cmd(const CommonOptions& common, PruneConfig config,
                     const std::string& out_dir, int bench_frames,
                     const PipelineConfigFile& file_config) {
    const SceneBundle bundle = load_bundle(common);
    config.render = render_config_for(bundle);
    config.scene_extent = bundle.scene_extent;
    config.validate();

    const MetricsRecord input_metrics = evaluate_views(bundle.cloud, bundle.views, 1, config.render);
    const double input_fps =
        bench_frames > 0
            ? bench_fps(bundle.cloud, bundle.views, bench_frames, 2, 1, config.render)
            : 0.0;

    auto [pruned, report] = run_pipeline(bundle.cloud, bundle.views, config);
    report.config_echo = config_to_json(file_config);
    report.zero_timings = common.deterministic;

    std::printf("%-18s %8s %8s %9s %10s %10s\n", "stage", "PSNR", "SSIM", "FPS", "gaussians",
                "size MB");
    print_stage_row("input", input_metrics.psnr_db, input_metrics.ssim, input_fps,
                    static_cast<long>(bundle.cloud.size()),
                    ply_byte_size(bundle.cloud) / 1e6);
    for (const RoundReport& r : report.rounds) {
        char label[64];
        std::snprintf(label, sizeof(label), "prune %.0f%%", r.percent * 100.0);
        const double size_mb =
            ply_byte_size_for(static_cast<std::size_t>(r.kept_count), bundle.cloud.sh_degree) / 1e6;
        print_stage_row(label, r.psnr_after_prune, r.ssim_after_prune, 0.0, r.kept_count, size_mb);
        std::snprintf(label, sizeof(label), "refine %d", r.refine_iters);
        print_stage_row(label, r.psnr_after_refine, r.ssim_after_refine, 0.0, r.kept_count,
                        size_mb);
    }
    if (bench_frames > 0) {
        const double final_fps = bench_fps(pruned, bundle.views, bench_frames, 2, 1, config.render);
        std::printf("final FPS %.1f (input %.1f)\n", final_fps, input_fps);
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_ply(pruned, (fs::path(out_dir) / "pruned.ply").string());
        write_text_atomic((fs::path(out_dir) / "report.json").string(),
                          report_to_json(report).dump(2) + "\n");
        std::printf("wrote %s/pruned.ply and report.json\n", out_dir.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensitivity-based pruning for Gaussian splat scenes"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic toy scene");
    CommonOptions synth_common;
    ToySceneSpec synth_spec;
    std::string synth_out;
    std::string synth_kinds = "transparent,occluded,duplicate";
    synth->add_option("--signal", synth_spec.signal_count, "Signal gaussian count");
    synth->add_option("--clutter", synth_spec.clutter_count, "Clutter gaussian count");
    synth->add_option("--views", synth_spec.view_count, "Ring camera count");
    synth->add_option("--res", synth_spec.resolution, "Image resolution");
    synth->add_option("--clutter-kinds", synth_kinds,
                      "Comma list of transparent,occluded,duplicate");
    synth->add_option("--out", synth_out, "Output scene directory")->required();
    add_common(synth, synth_common, false);

    // --- render --------------------------------------------------------
    auto* render = app.add_subcommand("render", "Render one view to a PNG");
    CommonOptions render_common;
    int render_view_index = 0;
    int render_divisor = 1;
    std::string render_out;
    std::string render_ply;
    bool render_gamma = false;
    render->add_option("--view", render_view_index, "View index");
    render->add_option("--divisor", render_divisor, "Resolution divisor (1,2,4,8)");
    render->add_option("--ply", render_ply, "Alternative point cloud to render");
    render->add_flag("--gamma", render_gamma, "Apply a 1/2.2 encode on export");
    render->add_option("--out", render_out, "Output PNG path")->required();
    add_common(render, render_common);

    // --- score ---------------------------------------------------------
    auto* score = app.add_subcommand("score", "Compute per-gaussian pruning scores");
    CommonOptions score_common;
    std::string score_variant = "mean-scale";
    int score_divisor = 4;
    double score_epsilon = 1e-12;
    std::string score_out;
    score->add_option("--variant", score_variant,
                      "mean-scale | mean-scale-rot | rgb | random | opacity | vis-volume");
    score->add_option("--divisor", score_divisor, "Resolution divisor for scoring");
    score->add_option("--epsilon", score_epsilon, "Eigenvalue clamp floor");
    score->add_option("--out", score_out, "Output score file")->required();
    add_common(score, score_common);

    // --- prune ---------------------------------------------------------
    auto* prune = app.add_subcommand("prune", "Remove the lowest-scoring gaussians");
    CommonOptions prune_common;
    std::string prune_variant = "mean-scale";
    std::string prune_scores_path;
    double prune_percent = 0.0;
    int prune_divisor = 4;
    std::string prune_out;
    prune->add_option("--percent", prune_percent, "Fraction to remove, in [0,1)")->required();
    prune->add_option("--variant", prune_variant, "Scorer when --scores is not given");
    prune->add_option("--scores", prune_scores_path, "Precomputed score file");
    prune->add_option("--divisor", prune_divisor, "Resolution divisor for scoring");
    prune->add_option("--out", prune_out, "Output PLY path")->required();
    add_common(prune, prune_common);

    // --- refine --------------------------------------------------------
    auto* refine_cmd = app.add_subcommand("refine", "Fine-tune all parameters with Adam");
    CommonOptions refine_common;
    int refine_iters = 500;
    double refine_lambda = 0.2;
    std::string refine_ply;
    std::string refine_out;
    OptimizerConfig refine_opt;
    refine_cmd->add_option("--iters", refine_iters, "Adam iterations");
    refine_cmd->add_option("--lambda-ssim", refine_lambda, "SSIM weight in the loss");
    refine_cmd->add_option("--ply", refine_ply, "Alternative point cloud to refine");
    refine_cmd->add_option("--position-lr", refine_opt.position_lr, "Position step size");
    refine_cmd->add_option("--scale-lr", refine_opt.log_scale_lr, "Log-scale step size");
    refine_cmd->add_option("--rotation-lr", refine_opt.rotation_lr, "Rotation step size");
    refine_cmd->add_option("--color-lr", refine_opt.color_lr, "Color/SH step size");
    refine_cmd->add_option("--opacity-lr", refine_opt.opacity_lr, "Opacity step size");
    refine_cmd->add_option("--out", refine_out, "Output PLY path")->required();
    add_common(refine_cmd, refine_common);

    // --- pipeline ------------------------------------------------------
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Multi-round prune-refine");
    CommonOptions pipeline_common;
    std::string pipeline_config_path;
    std::string pipeline_rounds;
    std::string pipeline_refine_iters;
    std::string pipeline_scorers;
    std::string pipeline_divisors;
    std::string pipeline_out;
    double pipeline_lambda = -1.0;
    int pipeline_bench_frames = 0;
    pipeline_cmd->add_option("--config", pipeline_config_path, "JSON config file");
    pipeline_cmd->add_option("--rounds", pipeline_rounds, "Per-round percents, e.g. 0.8,0.5");
    pipeline_cmd->add_option("--refine-iters", pipeline_refine_iters,
                             "Per-round refine iterations, e.g. 5000,5000");
    pipeline_cmd->add_option("--scorers", pipeline_scorers, "Per-round scorer names");
    pipeline_cmd->add_option("--divisors", pipeline_divisors, "Per-round score divisors");
    pipeline_cmd->add_option("--lambda-ssim", pipeline_lambda, "SSIM weight in the loss");
    pipeline_cmd->add_option("--bench-frames", pipeline_bench_frames,
                             "Measure FPS with this many frames (0 = skip)");
    pipeline_cmd->add_option("--out", pipeline_out, "Output directory");
    add_common(pipeline_cmd, pipeline_common);

    // --- sweep ---------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Metric grids over percentage pairs");
    CommonOptions sweep_common;
    std::string sweep_grid1;
    std::string sweep_grid2;
    int sweep_refine_iters = 0;
    int sweep_bench_frames = 0;
    std::string sweep_out;
    sweep->add_option("--round1", sweep_grid1, "Round-1 percents, e.g. 0.3,0.5,0.8")->required();
    sweep->add_option("--round2", sweep_grid2, "Round-2 percents")->required();
    sweep->add_option("--refine-iters", sweep_refine_iters, "Refine iterations per round");
    sweep->add_option("--bench-frames", sweep_bench_frames, "FPS bench frames (0 = skip)");
    sweep->add_option("--out", sweep_out, "Output directory for CSV grids")->required();
    add_common(sweep, sweep_common);

    // --- eval ----------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Metrics, residual maps and volume histogram");
    CommonOptions eval_common;
    std::string eval_ply;
    std::string eval_out;
    int eval_bench_frames = 0;
    int eval_bins = 32;
    eval->add_option("--ply", eval_ply, "Alternative point cloud to evaluate");
    eval->add_option("--bench-frames", eval_bench_frames, "FPS bench frames (0 = skip)");
    eval->add_option("--bins", eval_bins, "Volume histogram bins");
    eval->add_option("--out", eval_out, "Output directory")->required();
    add_common(eval, eval_common);

    // --- bench ---------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Rendering throughput");
    CommonOptions bench_common;
    std::string bench_ply;
    int bench_frames = 60;
    int bench_warmup = 5;
    int bench_divisor = 1;
    bench->add_option("--ply", bench_ply, "Alternative point cloud to bench");
    bench->add_option("--frames", bench_frames, "Measured frames");
    bench->add_option("--warmup", bench_warmup, "Unmeasured warmup frames");
    bench->add_option("--divisor", bench_divisor, "Resolution divisor");
    add_common(bench, bench_common);

    // --- gradcheck -----------------------------------------------------
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    CommonOptions gradcheck_common;
    int gradcheck_scenes = 20;
    int gradcheck_gaussians = 10;
    gradcheck->add_option("--scenes", gradcheck_scenes, "Randomized scenes to run");
    gradcheck->add_option("--gaussians", gradcheck_gaussians, "Max gaussians per scene");
    add_common(gradcheck, gradcheck_common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            std::vector<ClutterKind> kinds;
            std::stringstream stream(synth_kinds);
            std::string item;
            while (std::getline(stream, item, ',')) {
                if (item == "transparent") {
                    kinds.push_back(ClutterKind::Transparent);
                } else if (item == "occluded") {
                    kinds.push_back(ClutterKind::Occluded);
                } else if (item == "duplicate") {
                    kinds.push_back(ClutterKind::Duplicate);
                } else {
                    throw InvalidParameterError("unknown clutter kind '" + item + "'");
                }
            }
            synth_spec.clutter_kinds = std::move(kinds);
            synth_spec.seed = synth_common.seed;
            return run_synth(synth_common, synth_spec, synth_out);
        }

        if (*render) {
            SceneBundle bundle = load_bundle(render_common);
            if (!render_ply.empty()) {
                bundle.cloud = load_ply(render_ply);
            }
            if (render_view_index < 0 ||
                render_view_index >= static_cast<int>(bundle.views.size())) {
                throw InvalidParameterError("view index out of range");
            }
            const RenderedImage img = render_view(bundle.cloud, bundle.views[render_view_index],
                                                  render_divisor, render_config_for(bundle));
            save_png(render_out, img.rgb, render_gamma);
            std::printf("wrote %s (%dx%d)\n", render_out.c_str(), img.rgb.width, img.rgb.height);
            return 0;
        }

        if (*score) {
            const SceneBundle bundle = load_bundle(score_common);
            AccumulateOptions opts;
            opts.divisor = score_divisor;
            opts.threads = score_common.threads;
            opts.deterministic = score_common.deterministic;
            opts.render = render_config_for(bundle);
            const SensitivityScores scores =
                compute_scores(bundle.cloud, bundle.views, scorer_from_name(score_variant), opts,
                               score_common.seed, score_epsilon);
            save_scores(score_out, scores);
            std::printf("wrote %s (%zu scores, scorer %s)\n", score_out.c_str(),
                        scores.scores.size(), scorer_name(scores.scorer).c_str());
            return 0;
        }

        if (*prune) {
            const SceneBundle bundle = load_bundle(prune_common);
            SensitivityScores scores;
            if (!prune_scores_path.empty()) {
                scores.scores = load_scores(prune_scores_path);
                scores.scorer = Scorer::MeanScale;
            } else {
                AccumulateOptions opts;
                opts.divisor = prune_divisor;
                opts.threads = prune_common.threads;
                opts.deterministic = prune_common.deterministic;
                opts.render = render_config_for(bundle);
                scores = compute_scores(bundle.cloud, bundle.views,
                                        scorer_from_name(prune_variant), opts, prune_common.seed);
            }
            auto [pruned, removed] = prune_once(bundle.cloud, scores, prune_percent);
            save_ply(pruned, prune_out);
            std::printf("kept %zu, removed %zu -> %s\n", pruned.size(), removed.size(),
                        prune_out.c_str());
            return 0;
        }

        if (*refine_cmd) {
            SceneBundle bundle = load_bundle(refine_common);
            if (!refine_ply.empty()) {
                bundle.cloud = load_ply(refine_ply);
            }
            const RefineStats stats =
                refine(bundle.cloud, bundle.views, refine_iters, refine_opt, refine_lambda,
                       refine_common.seed, bundle.scene_extent, render_config_for(bundle));
            save_ply(bundle.cloud, refine_out);
            std::printf("refined %d iterations, loss %.6f -> %.6f, wrote %s\n", stats.iterations,
                        stats.first_loss, stats.last_loss, refine_out.c_str());
            return 0;
        }

        if (*pipeline_cmd) {
            PipelineConfigFile file_config;
            if (!pipeline_config_path.empty()) {
                file_config = load_config(pipeline_config_path);
            }
            if (file_config.rounds.empty()) {
                RoundConfig r1;
                r1.percent = 0.8;
                r1.refine_iters = 5000;
                RoundConfig r2 = r1;
                r2.percent = 0.5;
                file_config.rounds = {r1, r2};
            }
            // Flags override file values.
            if (!pipeline_rounds.empty()) {
                const auto percents = parse_percent_list(pipeline_rounds);
                file_config.rounds.assign(percents.size(), RoundConfig{});
                for (std::size_t i = 0; i < percents.size(); ++i) {
                    file_config.rounds[i].percent = percents[i];
                    file_config.rounds[i].refine_iters = 0;
                }
            }
            if (!pipeline_refine_iters.empty()) {
                const auto iters = parse_int_list(pipeline_refine_iters);
                for (std::size_t i = 0; i < file_config.rounds.size() && i < iters.size(); ++i) {
                    file_config.rounds[i].refine_iters = iters[i];
                }
            }
            if (!pipeline_scorers.empty()) {
                std::stringstream stream(pipeline_scorers);
                std::string item;
                std::size_t i = 0;
                while (std::getline(stream, item, ',') && i < file_config.rounds.size()) {
                    file_config.rounds[i++].scorer = scorer_from_name(item);
                }
            }
            if (!pipeline_divisors.empty()) {
                const auto divs = parse_int_list(pipeline_divisors);
                for (std::size_t i = 0; i < file_config.rounds.size() && i < divs.size(); ++i) {
                    file_config.rounds[i].divisor = divs[i];
                }
            }
            if (pipeline_lambda >= 0.0) {
                file_config.lambda_ssim = pipeline_lambda;
            }
            if (pipeline_common.seed != 0) {
                file_config.seed = pipeline_common.seed;
            }
            if (!pipeline_common.scene_dir.empty()) {
                file_config.scene_dir = pipeline_common.scene_dir;
            }
            if (!pipeline_out.empty()) {
                file_config.output_dir = pipeline_out;
            }

            PruneConfig config;
            config.rounds = file_config.rounds;
            config.optimizer = file_config.optimizer;
            config.lambda_ssim = file_config.lambda_ssim;
            config.seed = file_config.seed;
            config.threads = pipeline_common.threads != 0 ? pipeline_common.threads
                                                          : file_config.threads;
            config.deterministic = pipeline_common.deterministic || file_config.deterministic;
            config.score_epsilon = file_config.score_epsilon;
            CommonOptions common = pipeline_common;
            common.scene_dir = file_config.scene_dir;
            common.deterministic = config.deterministic;
            return run_pipeline_cmd(common, config, file_config.output_dir,
                                    pipeline_bench_frames, file_config);
        }

        if (*sweep) {
            const SceneBundle bundle = load_bundle(sweep_common);
            PruneConfig base;
            base.seed = sweep_common.seed;
            base.threads = sweep_common.threads;
            base.deterministic = sweep_common.deterministic;
            base.scene_extent = bundle.scene_extent;
            base.render = render_config_for(bundle);
            const SweepResult grid =
                sweep_percentages(bundle.cloud, bundle.views, parse_percent_list(sweep_grid1),
                                  parse_percent_list(sweep_grid2), sweep_refine_iters, base,
                                  sweep_bench_frames);
            fs::create_directories(sweep_out);
            write_grid_csv((fs::path(sweep_out) / "psnr.csv").string(), grid.round1_percents,
                           grid.round2_percents, grid.psnr);
            write_grid_csv((fs::path(sweep_out) / "ssim.csv").string(), grid.round1_percents,
                           grid.round2_percents, grid.ssim);
            if (sweep_bench_frames > 0) {
                write_grid_csv((fs::path(sweep_out) / "fps.csv").string(), grid.round1_percents,
                               grid.round2_percents, grid.fps);
            }
            std::printf("wrote %s/psnr.csv and ssim.csv\n", sweep_out.c_str());
            return 0;
        }

        if (*eval) {
            SceneBundle bundle = load_bundle(eval_common);
            if (!eval_ply.empty()) {
                bundle.cloud = load_ply(eval_ply);
            }
            const RenderConfig cfg = render_config_for(bundle);
            MetricsRecord metrics = evaluate_views(bundle.cloud, bundle.views, 1, cfg);
            metrics.size_mb = ply_byte_size(bundle.cloud) / 1e6;
            if (eval_bench_frames > 0) {
                metrics.fps = bench_fps(bundle.cloud, bundle.views, eval_bench_frames, 2, 1, cfg);
            }
            fs::create_directories(eval_out);
            nlohmann::json j{
                {"schema_version", 1},
                {"psnr_db", metrics.psnr_db},
                {"ssim", metrics.ssim},
                {"per_view_psnr", metrics.per_view_psnr},
                {"per_view_ssim", metrics.per_view_ssim},
                {"fps", metrics.fps},
                {"gaussian_count", metrics.gaussian_count},
                {"size_mb", metrics.size_mb},
            };
            write_text_atomic((fs::path(eval_out) / "metrics.json").string(), j.dump(2) + "\n");

            const Histogram hist = volume_histogram(bundle.cloud, eval_bins);
            std::ostringstream csv;
            csv << "bin_low,bin_high,count\n";
            for (std::size_t b = 0; b < hist.counts.size(); ++b) {
                csv << hist.edges[b] << "," << hist.edges[b + 1] << "," << hist.counts[b] << "\n";
            }
            write_text_atomic((fs::path(eval_out) / "volume_histogram.csv").string(), csv.str());

            int view_index = 0;
            for (const CameraView& view : bundle.views) {
                if (view.gt_image) {
                    const RenderedImage render = render_view(bundle.cloud, view, 1, cfg);
                    const GrayImage residual = residual_map(render.rgb, *view.gt_image);
                    char name[48];
                    std::snprintf(name, sizeof(name), "residual_%03d.png", view_index);
                    save_png_gray((fs::path(eval_out) / name).string(), residual);
                }
                ++view_index;
            }
            std::printf("PSNR %.2f dB, SSIM %.4f, %ld gaussians, %.2f MB -> %s\n",
                        metrics.psnr_db, metrics.ssim, metrics.gaussian_count, metrics.size_mb,
                        eval_out.c_str());
            return 0;
        }

        if (*bench) {
            SceneBundle bundle = load_bundle(bench_common);
            if (!bench_ply.empty()) {
                bundle.cloud = load_ply(bench_ply);
            }
            const double fps = bench_fps(bundle.cloud, bundle.views, bench_frames, bench_warmup,
                                         bench_divisor, render_config_for(bundle));
            std::printf("%.2f fps (%d frames, %d warmup, divisor %d, %zu gaussians)\n", fps,
                        bench_frames, bench_warmup, bench_divisor, bundle.cloud.size());
            return 0;
        }

        if (*gradcheck) {
            const GradCheckReport report = run_gradient_check(
                gradcheck_scenes, gradcheck_gaussians, gradcheck_common.seed);
            std::printf("gradcheck: %d scenes, %ld comparisons, %ld failures (worst %.3g of "
                        "tolerance)\n",
                        report.scenes, report.comparisons, report.failures, report.max_error);
            return report.failures == 0 ? 0 : 1;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
