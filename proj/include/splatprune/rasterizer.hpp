#pragma once

#include "splatprune/scene.hpp"

#include <cstdint>
#include <optional>

namespace splat {

/// Rendering thresholds. Defaults follow the reference 3D-GS rasterizer.
struct RenderConfig {
    Vec3 background = Vec3::Zero();
    double dilation = 0.3; // px^2 low-pass added to cov2d
    double near_plane = 0.2; // scene units
    double alpha_clamp = 0.99;
    double alpha_skip = 1.0 / 255.0;
    double transmittance_stop = 1e-4;
    double condition_limit = 1e12; // cov2d above this is skipped
};

/// Screen-space footprint of one Gaussian in one view.
struct ProjectedGaussian {
    Vec2 mean2d; // pixels
    Mat2 cov2d; // pixels^2, dilated
    Mat2 cov2d_inv;
    double depth = 0.0; // camera-space z
    Vec3 view_color;
    double opacity = 0.0; // activated
    int source_index = 0;
    // Inclusive pixel rectangle of influence, clipped to the image.
    int col_min = 0, col_max = -1, row_min = 0, row_max = -1;
    Vec3 cam_point; // camera-space position (kept for gradient passes)
    unsigned color_clamp_mask = 0;
};

struct RenderedImage {
    Image rgb; // clamped to [0,1]
    std::vector<double> final_transmittance; // height * width
    int resolution_divisor = 1;
};

struct RenderStats {
    long skipped_singular = 0;
};

/// Camera for rendering at 1/divisor resolution: intrinsics scaled by
/// 1/divisor, extents by ceil division. Divisor must be one of {1,2,4,8}.
CameraView scaled_camera(const CameraView& cam, int divisor);

/// Projects one Gaussian of the cloud into the view. Returns nullopt when the
/// Gaussian is culled (behind the near plane or its footprint misses the
/// image) or its 2D covariance is too ill-conditioned to invert.
std::optional<ProjectedGaussian> project_gaussian(const GaussianCloud& cloud, std::size_t index,
                                                  const CameraView& cam,
                                                  const RenderConfig& cfg = {},
                                                  RenderStats* stats = nullptr);

/// Stable permutation sorting projected Gaussians by ascending depth; equal
/// depths keep source-index order.
std::vector<int> depth_sort(const std::vector<ProjectedGaussian>& projected);

/// Front-to-back alpha compositing of the cloud over the background color.
RenderedImage render_view(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                          const RenderConfig& cfg = {}, RenderStats* stats = nullptr);

/// One surviving compositing term at a pixel.
struct Contribution {
    std::int32_t proj_index; // into ForwardRecord::projected
    double alpha; // post-clamp alpha
    double t_before; // transmittance in front of this term
};

/// Forward render that keeps everything the backward passes need: the sorted
/// projections, the unclamped composite, and the per-pixel contribution lists.
struct ForwardRecord {
    CameraView cam; // divisor-scaled camera actually rendered
    int divisor = 1;
    std::vector<ProjectedGaussian> projected; // depth-sorted survivors
    Image image; // pre-clamp composite
    std::vector<double> final_transmittance;
    std::vector<std::uint32_t> offsets; // pixel -> contribs range, size H*W+1
    std::vector<Contribution> contribs;

    const CameraView& camera() const { return cam; }
};

ForwardRecord render_with_record(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                                 const RenderConfig& cfg = {}, RenderStats* stats = nullptr);

/// Per-Gaussian count of pixels it contributed to across the given views.
std::vector<long> count_hits(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                             int divisor, const RenderConfig& cfg = {});

} // namespace splat
