#include "splatprune/pipeline.hpp"

#include "splatprune/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace splat {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<long> score_histogram(const std::vector<double>& scores, double lo, double hi,
                                  int bins) {
    std::vector<long> hist(bins, 0);
    if (scores.empty()) {
        return hist;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (double s : scores) {
        const int idx = std::clamp(static_cast<int>((s - lo) / span * bins), 0, bins - 1);
        ++hist[idx];
    }
    return hist;
}

} // namespace

void PruneConfig::validate() const {
    double kept = 1.0;
    for (const RoundConfig& r : rounds) {
        if (!(r.percent >= 0.0 && r.percent < 1.0)) {
            throw InvalidParameterError("round percents must lie in [0, 1)");
        }
        if (r.refine_iters < 0) {
            throw InvalidParameterError("refine_iters must be >= 0");
        }
        kept *= 1.0 - r.percent;
    }
    if (!(kept > 0.0)) {
        throw InvalidParameterError("cumulative kept fraction must stay positive");
    }
    if (!(lambda_ssim >= 0.0 && lambda_ssim < 1.0)) {
        throw InvalidParameterError("lambda_ssim must be in [0, 1)");
    }
}

std::pair<GaussianCloud, std::vector<int>> prune_once(const GaussianCloud& cloud,
                                                      const SensitivityScores& scores,
                                                      double percent) {
    if (scores.scores.size() != cloud.size()) {
        throw ShapeError("score count does not match gaussian count");
    }
    if (!(percent >= 0.0 && percent < 1.0)) {
        throw InvalidParameterError("percent must lie in [0, 1)");
    }
    const std::size_t n = cloud.size();
    const std::size_t remove = static_cast<std::size_t>(std::floor(percent * static_cast<double>(n)));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores.scores[a] != scores.scores[b]) {
            return scores.scores[a] < scores.scores[b];
        }
        const double oa = cloud.activated_opacity(a);
        const double ob = cloud.activated_opacity(b);
        if (oa != ob) {
            return oa < ob;
        }
        return a < b;
    });

    std::vector<int> removed(order.begin(), order.begin() + remove);
    std::sort(removed.begin(), removed.end());
    std::vector<char> drop(n, 0);
    for (int idx : removed) {
        drop[idx] = 1;
    }
    std::vector<int> keep;
    keep.reserve(n - remove);
    for (std::size_t i = 0; i < n; ++i) {
        if (!drop[i]) {
            keep.push_back(static_cast<int>(i));
        }
    }
    return {cloud.subset(keep), std::move(removed)};
}

namespace {

// Bias-corrected first/second moment update for one scalar.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

void adam_update(AdamState& state, std::size_t offset, double grad, double lr, double beta1,
                 double beta2, double eps, double& param, double bias1, double bias2) {
    double& m = state.m[offset];
    double& v = state.v[offset];
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mhat = m / bias1;
    const double vhat = v / bias2;
    param -= lr * mhat / (std::sqrt(vhat) + eps);
}

} // namespace

RefineStats refine(GaussianCloud& cloud, const std::vector<CameraView>& views, int iters,
                   const OptimizerConfig& opt, double lambda_ssim, std::uint64_t seed,
                   double scene_extent, const RenderConfig& cfg) {
    RefineStats stats;
    if (iters <= 0 || cloud.size() == 0) {
        return stats;
    }
    for (const CameraView& v : views) {
        if (!v.gt_image) {
            throw InvalidParameterError("refine requires ground-truth images on every view");
        }
    }
    if (views.empty()) {
        throw InvalidParameterError("refine requires at least one view");
    }

    const std::size_t n = cloud.size();
    const std::size_t rest_w = static_cast<std::size_t>(cloud.sh_rest_width());
    AdamState s_pos, s_scale, s_rot, s_color, s_rest, s_opacity;
    s_pos.init(n * 3);
    s_scale.init(n * 3);
    s_rot.init(n * 4);
    s_color.init(n * 3);
    s_rest.init(n * rest_w);
    s_opacity.init(n);

    Rng rng(seed);
    std::vector<int> view_order(views.size());
    std::iota(view_order.begin(), view_order.end(), 0);
    rng.shuffle(view_order);
    std::size_t cursor = 0;

    const double pos_lr = opt.position_lr * scene_extent;
    for (int it = 0; it < iters; ++it) {
        if (cursor == view_order.size()) {
            rng.shuffle(view_order);
            cursor = 0;
        }
        const CameraView& view = views[view_order[cursor++]];
        const LossResult loss = loss_and_gradients(cloud, view, lambda_ssim, cfg);
        if (it == 0) {
            stats.first_loss = loss.loss;
        }
        stats.last_loss = loss.loss;

        const long step = ++s_pos.step;
        s_scale.step = s_rot.step = s_color.step = s_rest.step = s_opacity.step = step;
        const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
        const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));

        for (std::size_t i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                adam_update(s_pos, i * 3 + k, loss.gradients.positions[i][k], pos_lr, opt.beta1,
                            opt.beta2, opt.eps, cloud.positions[i][k], bias1, bias2);
                adam_update(s_scale, i * 3 + k, loss.gradients.log_scales[i][k], opt.log_scale_lr,
                            opt.beta1, opt.beta2, opt.eps, cloud.log_scales[i][k], bias1, bias2);
                adam_update(s_color, i * 3 + k, loss.gradients.base_colors[i][k], opt.color_lr,
                            opt.beta1, opt.beta2, opt.eps, cloud.base_colors[i][k], bias1, bias2);
            }
            for (int k = 0; k < 4; ++k) {
                adam_update(s_rot, i * 4 + k, loss.gradients.rotations[i][k], opt.rotation_lr,
                            opt.beta1, opt.beta2, opt.eps, cloud.rotations[i][k], bias1, bias2);
            }
            adam_update(s_opacity, i, loss.gradients.raw_opacities[i], opt.opacity_lr, opt.beta1,
                        opt.beta2, opt.eps, cloud.raw_opacities[i], bias1, bias2);
        }
        for (std::size_t j = 0; j < n * rest_w; ++j) {
            adam_update(s_rest, j, loss.gradients.sh_rest[j], opt.color_lr, opt.beta1, opt.beta2,
                        opt.eps, cloud.sh_rest[j], bias1, bias2);
        }
        stats.iterations = it + 1;
    }
    return stats;
}

std::pair<GaussianCloud, PruneReport> run_pipeline(const GaussianCloud& cloud,
                                                   const std::vector<CameraView>& views,
                                                   const PruneConfig& config) {
    config.validate();
    PruneReport report;
    report.initial_count = static_cast<long>(cloud.size());
    double kept_fraction = 1.0;
    for (const RoundConfig& r : config.rounds) {
        kept_fraction *= 1.0 - r.percent;
    }
    report.cumulative_percent = 1.0 - kept_fraction;

    GaussianCloud current = cloud;
    // Maps current rows back to indices in the input cloud.
    std::vector<int> original_ids(cloud.size());
    std::iota(original_ids.begin(), original_ids.end(), 0);

    AccumulateOptions acc;
    acc.threads = config.threads;
    acc.deterministic = config.deterministic;
    acc.render = config.render;

    int round_number = 0;
    for (const RoundConfig& round : config.rounds) {
        RoundReport rr;
        rr.round = round_number++;
        rr.percent = round.percent;
        rr.refine_iters = round.refine_iters;
        rr.scorer = scorer_name(round.scorer);

        if (config.collect_metrics) {
            const MetricsRecord m = evaluate_views(current, views, 1, config.render);
            rr.psnr_before = m.psnr_db;
            rr.ssim_before = m.ssim;
        }

        acc.divisor = round.divisor;
        auto t0 = std::chrono::steady_clock::now();
        const SensitivityScores scores =
            compute_scores(current, views, round.scorer, acc, config.seed + rr.round,
                           config.score_epsilon);
        rr.score_seconds = seconds_since(t0);
        if (!scores.scores.empty()) {
            rr.score_min = *std::min_element(scores.scores.begin(), scores.scores.end());
            rr.score_max = *std::max_element(scores.scores.begin(), scores.scores.end());
            rr.score_mean = std::accumulate(scores.scores.begin(), scores.scores.end(), 0.0) /
                            static_cast<double>(scores.scores.size());
            rr.score_histogram = score_histogram(scores.scores, rr.score_min, rr.score_max, 16);
        }

        t0 = std::chrono::steady_clock::now();
        auto [pruned, removed] = prune_once(current, scores, round.percent);
        rr.prune_seconds = seconds_since(t0);
        rr.removed_count = static_cast<long>(removed.size());
        rr.kept_count = static_cast<long>(pruned.size());
        rr.removed_original_indices.reserve(removed.size());
        for (int idx : removed) {
            rr.removed_original_indices.push_back(original_ids[idx]);
        }
        std::sort(rr.removed_original_indices.begin(), rr.removed_original_indices.end());

        std::vector<int> surviving;
        surviving.reserve(original_ids.size() - removed.size());
        std::vector<char> drop(original_ids.size(), 0);
        for (int idx : removed) {
            drop[idx] = 1;
        }
        for (std::size_t i = 0; i < original_ids.size(); ++i) {
            if (!drop[i]) {
                surviving.push_back(original_ids[i]);
            }
        }
        original_ids = std::move(surviving);
        current = std::move(pruned);

        if (config.collect_metrics) {
            const MetricsRecord m = evaluate_views(current, views, 1, config.render);
            rr.psnr_after_prune = m.psnr_db;
            rr.ssim_after_prune = m.ssim;
        }

        t0 = std::chrono::steady_clock::now();
        refine(current, views, round.refine_iters, config.optimizer, config.lambda_ssim,
               config.seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(rr.round)),
               config.scene_extent, config.render);
        rr.refine_seconds = seconds_since(t0);

        if (config.collect_metrics) {
            const MetricsRecord m = evaluate_views(current, views, 1, config.render);
            rr.psnr_after_refine = m.psnr_db;
            rr.ssim_after_refine = m.ssim;
        } else {
            rr.psnr_after_refine = rr.psnr_after_prune;
            rr.ssim_after_refine = rr.ssim_after_prune;
        }
        report.rounds.push_back(std::move(rr));
    }
    report.final_count = static_cast<long>(current.size());
    return {std::move(current), std::move(report)};
}

nlohmann::json report_to_json(const PruneReport& report) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const RoundReport& r : report.rounds) {
        rounds.push_back({
            {"round", r.round},
            {"percent", r.percent},
            {"refine_iters", r.refine_iters},
            {"scorer", r.scorer},
            {"kept_count", r.kept_count},
            {"removed_count", r.removed_count},
            {"removed_original_indices", r.removed_original_indices},
            {"psnr_before", r.psnr_before},
            {"ssim_before", r.ssim_before},
            {"psnr_after_prune", r.psnr_after_prune},
            {"ssim_after_prune", r.ssim_after_prune},
            {"psnr_after_refine", r.psnr_after_refine},
            {"ssim_after_refine", r.ssim_after_refine},
            {"score_min", r.score_min},
            {"score_max", r.score_max},
            {"score_mean", r.score_mean},
            {"score_histogram", r.score_histogram},
            {"score_seconds", report.zero_timings ? 0.0 : r.score_seconds},
            {"prune_seconds", report.zero_timings ? 0.0 : r.prune_seconds},
            {"refine_seconds", report.zero_timings ? 0.0 : r.refine_seconds},
        });
    }
    return nlohmann::json{
        {"schema_version", 1},
        {"initial_count", report.initial_count},
        {"final_count", report.final_count},
        {"cumulative_percent", report.cumulative_percent},
        {"rounds", std::move(rounds)},
        {"config", report.config_echo},
    };
}

SweepResult sweep_percentages(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                              const std::vector<double>& round1_percents,
                              const std::vector<double>& round2_percents, int refine_iters,
                              const PruneConfig& base, int bench_frames) {
    SweepResult out;
    out.round1_percents = round1_percents;
    out.round2_percents = round2_percents;
    const std::size_t cells = round1_percents.size() * round2_percents.size();
    out.psnr.assign(cells, 0.0);
    out.ssim.assign(cells, 0.0);
    out.fps.assign(cells, 0.0);
    for (std::size_t i = 0; i < round1_percents.size(); ++i) {
        for (std::size_t j = 0; j < round2_percents.size(); ++j) {
            PruneConfig config = base;
            config.rounds.clear();
            RoundConfig r1;
            r1.percent = round1_percents[i];
            r1.refine_iters = refine_iters;
            config.rounds.push_back(r1);
            RoundConfig r2 = r1;
            r2.percent = round2_percents[j];
            config.rounds.push_back(r2);
            config.collect_metrics = false;
            auto [pruned, report] = run_pipeline(cloud, views, config);
            const MetricsRecord m = evaluate_views(pruned, views, 1, config.render);
            const std::size_t cell = i * round2_percents.size() + j;
            out.psnr[cell] = m.psnr_db;
            out.ssim[cell] = m.ssim;
            if (bench_frames > 0) {
                out.fps[cell] = bench_fps(pruned, views, bench_frames, 1, 1, config.render);
            }
        }
    }
    return out;
}

} // namespace splat
