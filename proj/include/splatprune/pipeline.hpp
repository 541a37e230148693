#pragma once

#include "splatprune/metrics.hpp"
#include "splatprune/sensitivity.hpp"

#include "json.hpp"

namespace splat {

/// Adam step sizes per parameter group plus moment constants. The position
/// step is additionally multiplied by the scene extent.
struct OptimizerConfig {
    double position_lr = 1.6e-4;
    double log_scale_lr = 5e-3;
    double rotation_lr = 1e-3;
    double color_lr = 2.5e-3; // base colors and higher SH bands
    double opacity_lr = 5e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

struct RoundConfig {
    double percent = 0.0; // fraction removed this round, in [0,1)
    int refine_iters = 0;
    Scorer scorer = Scorer::MeanScale;
    int divisor = 4;
};

struct PruneConfig {
    std::vector<RoundConfig> rounds;
    OptimizerConfig optimizer;
    double lambda_ssim = 0.2;
    std::uint64_t seed = 0;
    double scene_extent = 1.0;
    double score_epsilon = 1e-12;
    int threads = 0;
    bool deterministic = true;
    bool collect_metrics = true;
    RenderConfig render;

    void validate() const;
};

struct RoundReport {
    int round = 0;
    double percent = 0.0;
    int refine_iters = 0;
    std::string scorer;
    long kept_count = 0;
    long removed_count = 0;
    std::vector<int> removed_original_indices; // sorted, ids in the input cloud
    double psnr_before = 0.0, ssim_before = 0.0;
    double psnr_after_prune = 0.0, ssim_after_prune = 0.0;
    double psnr_after_refine = 0.0, ssim_after_refine = 0.0;
    double score_min = 0.0, score_max = 0.0, score_mean = 0.0;
    std::vector<long> score_histogram; // 16 bins over [score_min, score_max]
    double score_seconds = 0.0, prune_seconds = 0.0, refine_seconds = 0.0;
};

struct PruneReport {
    long initial_count = 0;
    long final_count = 0;
    double cumulative_percent = 0.0; // 1 - prod(1 - percent_r)
    std::vector<RoundReport> rounds;
    nlohmann::json config_echo;
    bool zero_timings = false; // set for byte-reproducible output
};

nlohmann::json report_to_json(const PruneReport& report);

/// Removes exactly floor(percent * N) Gaussians with the lowest scores.
/// Ties break by ascending activated opacity, then index; survivors keep
/// their relative order. Returns the compacted cloud and the removed indices
/// in ascending order.
std::pair<GaussianCloud, std::vector<int>> prune_once(const GaussianCloud& cloud,
                                                      const SensitivityScores& scores,
                                                      double percent);

struct RefineStats {
    double first_loss = 0.0;
    double last_loss = 0.0;
    int iterations = 0;
};

/// Adam fine-tuning of every parameter over views sampled from a seeded
/// shuffle (reshuffled each epoch). The Gaussian count never changes and
/// moments start at zero.
RefineStats refine(GaussianCloud& cloud, const std::vector<CameraView>& views, int iters,
                   const OptimizerConfig& opt, double lambda_ssim, std::uint64_t seed,
                   double scene_extent = 1.0, const RenderConfig& cfg = {});

/// score -> prune -> refine per round.
std::pair<GaussianCloud, PruneReport> run_pipeline(const GaussianCloud& cloud,
                                                   const std::vector<CameraView>& views,
                                                   const PruneConfig& config);

struct SweepResult {
    std::vector<double> round1_percents;
    std::vector<double> round2_percents;
    // Row-major [round1 index][round2 index].
    std::vector<double> psnr;
    std::vector<double> ssim;
    std::vector<double> fps;

    double& cell(std::vector<double>& grid, std::size_t i, std::size_t j) {
        return grid[i * round2_percents.size() + j];
    }
};

/// Runs the two-round pipeline for every percentage pair and collects final
/// metrics (FPS measured with a short bench when bench_frames > 0).
SweepResult sweep_percentages(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                              const std::vector<double>& round1_percents,
                              const std::vector<double>& round2_percents, int refine_iters,
                              const PruneConfig& base, int bench_frames = 0);

} // namespace splat
