#pragma once

#include "splatprune/rasterizer.hpp"
#include "splatprune/scene.hpp"

namespace splat {

/// 10 log10(1 / MSE) over all pixels and channels, capped at 100 dB for
/// identical images. Expects values in [0,1].
double psnr(const Image& a, const Image& b);

/// Mean structural similarity, 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, dynamic range 1, per channel then averaged. Only windows fully
/// inside the image count (valid-region aggregation). Throws ShapeError when
/// the image is smaller than the window.
double ssim(const Image& a, const Image& b);

/// SSIM plus its exact gradient with respect to the first image.
struct SsimResult {
    double value = 0.0;
    std::vector<double> d_value_d_a; // same layout as Image::data
};
SsimResult ssim_with_gradient(const Image& a, const Image& b);

/// Per-pixel mean over channels of |a - b|.
GrayImage residual_map(const Image& a, const Image& b);

struct Histogram {
    std::vector<double> edges; // bins + 1
    std::vector<long> counts; // bins
};

/// Histogram of ln det Sigma per Gaussian (= 2 * sum of log-scales).
Histogram volume_histogram(const GaussianCloud& cloud, int bins);

struct MetricsRecord {
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    double fps = 0.0; // 0 when not measured
    long gaussian_count = 0;
    double size_mb = 0.0;
};

/// Mean PSNR/SSIM over all views carrying ground truth, rendered at the given
/// divisor.
MetricsRecord evaluate_views(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                             int divisor = 1, const RenderConfig& cfg = {});

/// Renders `warmup` unmeasured frames then `frames` measured ones round-robin
/// over the views; returns frames / elapsed seconds.
double bench_fps(const GaussianCloud& cloud, const std::vector<CameraView>& views, int frames,
                 int warmup, int divisor = 1, const RenderConfig& cfg = {});

} // namespace splat
