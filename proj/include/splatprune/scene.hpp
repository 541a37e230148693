#pragma once

#include "splatprune/types.hpp"

#include <array>
#include <optional>
#include <span>

namespace splat {

/// A set of N anisotropic Gaussians. Parameters are stored raw: scales as
/// logs, opacities as logits, quaternions unnormalized between uses (they are
/// renormalized wherever a rotation matrix is built, since optimizer steps
/// denormalize them).
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations; // quaternion (w, x, y, z)
    std::vector<Vec3> base_colors; // degree-0 SH coefficients
    std::vector<double> sh_rest; // N * sh_rest_width(), layout [i][coeff * 3 + channel]
    std::vector<double> raw_opacities; // pre-sigmoid logits
    int sh_degree = 0;

    std::size_t size() const { return positions.size(); }

    /// Number of higher-order SH coefficients per channel: (deg+1)^2 - 1.
    int sh_coeff_count() const { return (sh_degree + 1) * (sh_degree + 1) - 1; }
    int sh_rest_width() const { return 3 * sh_coeff_count(); }

    const double* sh_rest_for(std::size_t i) const {
        return sh_rest.data() + i * static_cast<std::size_t>(sh_rest_width());
    }

    double activated_opacity(std::size_t i) const { return sigmoid(raw_opacities[i]); }
    Vec3 activated_scale(std::size_t i) const { return log_scales[i].array().exp(); }

    /// Throws ShapeError / InvalidParameterError when the invariants
    /// (consistent leading dimension, finite values, positive scales) fail.
    void validate() const;

    /// New cloud containing the rows listed in `keep`, in that order.
    GaussianCloud subset(const std::vector<int>& keep) const;
};

/// Pinhole camera with a 3x4 world-to-camera rigid transform and optional
/// ground-truth image for loss/metric computation.
struct CameraView {
    Mat3 rotation = Mat3::Identity(); // world-to-camera
    Vec3 translation = Vec3::Zero();
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    std::optional<Image> gt_image;

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 camera_center() const { return -rotation.transpose() * translation; }

    void validate() const;
};

/// Rotation/scale factorization of a Gaussian covariance.
struct CovarianceDecomposition {
    Mat3 R;
    Mat3 S; // diagonal, exp(log_scale)
    Mat3 Sigma; // R S S^T R^T
};

/// Rotation matrix from a (w, x, y, z) quaternion; normalizes internally.
Mat3 quat_to_rotation(const Vec4& q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)). Throws
/// InvalidParameterError on non-finite input or a zero quaternion.
CovarianceDecomposition build_covariance(const Vec3& log_scale, const Vec4& quaternion);

/// Derivatives of Sigma with respect to the three log-scales and the four
/// raw (unnormalized) quaternion components.
struct CovarianceJacobian {
    std::array<Mat3, 3> d_sigma_d_log_scale;
    std::array<Mat3, 4> d_sigma_d_quat;
};
CovarianceJacobian covariance_jacobian(const Vec3& log_scale, const Vec4& quaternion);

/// View-dependent color: real-SH expansion shifted by +0.5 and clamped below
/// at zero. `sh_rest` holds 3 * ((degree+1)^2 - 1) values in [coeff][channel]
/// order; throws ShapeError when its length disagrees with `degree`.
Vec3 eval_sh(const Vec3& base_color, std::span<const double> sh_rest, const Vec3& view_dir,
             int degree);

/// eval_sh plus the derivative of the (pre-clamp) color with respect to the
/// view direction. clamp_mask bit c is set when channel c was clamped to 0;
/// clamped channels report zero direction derivative.
struct ShEval {
    Vec3 rgb;
    Mat3 d_rgb_d_dir; // row = channel, col = direction component
    unsigned clamp_mask = 0;
};
ShEval eval_sh_with_gradient(const Vec3& base_color, std::span<const double> sh_rest,
                             const Vec3& view_dir, int degree);

/// Values of the SH basis functions (excluding the constant term) at a
/// direction, in storage order. Used for coefficient gradients.
void sh_basis(const Vec3& dir, int degree, double* out /* sh_coeff_count values */);

/// A cloud together with its training views and rendering context.
struct SceneBundle {
    GaussianCloud cloud;
    std::vector<CameraView> views;
    Vec3 background = Vec3::Zero();
    int sh_degree = 0;
    double scene_extent = 1.0;
};

constexpr double kShC0 = 0.28209479177387814; // 1 / (2 sqrt(pi))

} // namespace splat
