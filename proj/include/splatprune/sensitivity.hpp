#pragma once

#include "splatprune/gradients.hpp"

#include <string>

namespace splat {

/// Symmetric per-Gaussian accumulator of Jacobian outer products.
struct FisherBlock {
    Eigen::MatrixXd matrix; // d x d
    long hit_count = 0; // pixels that contributed
    int gaussian_index = 0;
};

/// How a pruning score is produced: a Fisher variant or a baseline heuristic.
enum class Scorer { MeanScale, MeanScaleRot, Rgb, Random, Opacity, VisVolume };

constexpr bool is_fisher_scorer(Scorer s) {
    return s == Scorer::MeanScale || s == Scorer::MeanScaleRot || s == Scorer::Rgb;
}

ParamSet scorer_param_set(Scorer s);

std::string scorer_name(Scorer s); // kebab-case, e.g. "mean-scale"
Scorer scorer_from_name(const std::string& name);

struct SensitivityScores {
    std::vector<double> scores; // natural-log units for Fisher variants
    Scorer scorer = Scorer::MeanScale;
    int divisor = 4;
    double epsilon = 0.0; // eigenvalue clamp floor, 0 for baselines
};

struct AccumulateOptions {
    int divisor = 4;
    int threads = 0; // 0 = hardware concurrency
    bool deterministic = false; // serial view loop
    RenderConfig render;
};

/// Sums J^T J over every view, pixel, and channel of the per-pixel parameter
/// Jacobians. Views are accumulated into per-view partial sums that are merged
/// in view order, so results are identical with any thread count and two-view
/// accumulation equals the sum of the single-view runs.
std::vector<FisherBlock> accumulate_fisher(const GaussianCloud& cloud,
                                           const std::vector<CameraView>& views, ParamSet set,
                                           const AccumulateOptions& opts = {});

/// score_i = sum_k ln(max(lambda_k, epsilon)) over the eigenvalues of block i.
/// Blocks with hit_count = 0 score exactly d * ln(epsilon).
SensitivityScores score_log_det(const std::vector<FisherBlock>& blocks, double epsilon = 1e-12,
                                ParamSet set = ParamSet::MeanScale, int divisor = 4);

/// Baseline scorers: seeded uniform noise, activated opacity, or
/// hit-count * opacity * (det Sigma)^0.05.
SensitivityScores score_baseline(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                                 Scorer kind, std::uint64_t seed = 0, int divisor = 1,
                                 const RenderConfig& cfg = {});

/// Convenience: run the configured scorer (Fisher variant or baseline).
SensitivityScores compute_scores(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                                 Scorer scorer, const AccumulateOptions& opts, std::uint64_t seed,
                                 double epsilon = 1e-12);

/// Two-column text file: index score.
void save_scores(const std::string& path, const SensitivityScores& scores);
std::vector<double> load_scores(const std::string& path);

} // namespace splat
