#pragma once

#include "splatprune/rasterizer.hpp"

#include <functional>

namespace splat {

/// Parameter block a pixel Jacobian is taken over.
enum class ParamSet {
    MeanScale, // position xyz, log-scale xyz (d = 6)
    MeanScaleRot, // + raw quaternion wxyz (d = 10)
    Rgb, // the per-view composited color (d = 3)
};

constexpr int param_dim(ParamSet set) {
    switch (set) {
    case ParamSet::MeanScale: return 6;
    case ParamSet::MeanScaleRot: return 10;
    case ParamSet::Rgb: return 3;
    }
    return 0;
}

/// Exact derivative of one pixel's pre-clamp RGB with respect to one
/// Gaussian's parameter block. Columns follow the ParamSet ordering; only the
/// left `dim` columns of `jac` are meaningful.
struct PixelJacobian {
    int gaussian_index = 0;
    int row = 0;
    int col = 0;
    int dim = 0;
    Eigen::Matrix<double, 3, 10> jac;
};

using JacobianSink = std::function<void(const PixelJacobian&)>;

/// Renders the view and streams the Jacobian of every surviving
/// (pixel, Gaussian) compositing term to `sink`. Pixels are visited in
/// row-major order and contributors back to front. Terms dropped by the alpha
/// skip, the transmittance stop, or culling are never emitted (their
/// derivatives are zero); the alpha clamp zeroes the alpha-path columns.
RenderedImage render_with_param_jacobians(const GaussianCloud& cloud, const CameraView& cam,
                                          int divisor, ParamSet set, const JacobianSink& sink,
                                          const RenderConfig& cfg = {});

/// Gradients of a scalar loss with respect to every stored parameter array.
struct FullGradients {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations;
    std::vector<Vec3> base_colors;
    std::vector<double> sh_rest;
    std::vector<double> raw_opacities;

    void resize_zero(const GaussianCloud& cloud);
};

struct LossResult {
    double loss = 0.0;
    double l1 = 0.0;
    double ssim_value = 1.0; // only meaningful when lambda_ssim > 0
    FullGradients gradients;
};

/// loss = (1-lambda) * mean|I - gt| + lambda * (1 - SSIM(I, gt)) on the raw
/// (unclamped) full-resolution composite, with exact analytic gradients.
LossResult loss_and_gradients(const GaussianCloud& cloud, const CameraView& cam,
                              double lambda_ssim, const RenderConfig& cfg = {});

/// Stored parameter arrays addressable by the finite-difference oracle.
enum class ParamArray { Position, LogScale, Rotation, BaseColor, ShRest, Opacity };

/// Central-difference derivative of the unclamped composite with respect to
/// one stored scalar parameter. Independent of the analytic backward path.
Image finite_difference_jacobian(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                                 ParamArray array, std::size_t gaussian, int component,
                                 double step, const RenderConfig& cfg = {});

/// Self-contained analytic-versus-finite-difference sweep over randomized
/// small scenes (all three parameter sets). Scenes are regenerated until every
/// per-pixel alpha, transmittance value and SH channel clears a margin around
/// the rasterizer's thresholds, so the center difference stays on one side of
/// each. An entry fails when |analytic - fd| > max(abs_floor, rel_tol * max).
struct GradCheckReport {
    int scenes = 0;
    long comparisons = 0;
    long failures = 0;
    double max_error = 0.0; // worst |analytic - fd| after tolerance scaling
};
GradCheckReport run_gradient_check(int scenes, int max_gaussians, std::uint64_t seed,
                                   double step = 1e-4, double rel_tol = 1e-3,
                                   double abs_floor = 1e-6);

} // namespace splat
