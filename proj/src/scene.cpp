#include "splatprune/scene.hpp"

#include <algorithm>
#include <cmath>

namespace splat {

namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                             -1.0925484305920792, 0.5462742152960396};
constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                             0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                             -0.5900435899266435};

bool finite(const Vec3& v) { return v.allFinite(); }
bool finite(const Vec4& v) { return v.allFinite(); }

// dR/dq for a *normalized* quaternion (w, x, y, z).
std::array<Mat3, 4> rotation_quat_derivatives(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Mat3, 4> d;
    d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
    d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    for (auto& m : d) {
        m *= 2.0;
    }
    return d;
}

} // namespace

void GaussianCloud::validate() const {
    const std::size_t n = positions.size();
    if (log_scales.size() != n || rotations.size() != n || base_colors.size() != n ||
        raw_opacities.size() != n) {
        throw ShapeError("gaussian cloud arrays disagree on leading dimension");
    }
    if (sh_degree < 0 || sh_degree > 3) {
        throw InvalidParameterError("sh_degree must be in 0..3");
    }
    if (sh_rest.size() != n * static_cast<std::size_t>(sh_rest_width())) {
        throw ShapeError("sh_rest length does not match N * 3 * ((deg+1)^2 - 1)");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!finite(positions[i]) || !finite(log_scales[i]) || !finite(rotations[i]) ||
            !finite(base_colors[i]) || !std::isfinite(raw_opacities[i])) {
            throw InvalidParameterError("non-finite parameter at gaussian " + std::to_string(i));
        }
        if (rotations[i].norm() < 1e-12) {
            throw InvalidParameterError("zero quaternion at gaussian " + std::to_string(i));
        }
        if (!activated_scale(i).allFinite()) {
            throw InvalidParameterError("scale overflow at gaussian " + std::to_string(i));
        }
    }
    for (double v : sh_rest) {
        if (!std::isfinite(v)) {
            throw InvalidParameterError("non-finite SH coefficient");
        }
    }
}

GaussianCloud GaussianCloud::subset(const std::vector<int>& keep) const {
    GaussianCloud out;
    out.sh_degree = sh_degree;
    const std::size_t w = static_cast<std::size_t>(sh_rest_width());
    out.positions.reserve(keep.size());
    out.log_scales.reserve(keep.size());
    out.rotations.reserve(keep.size());
    out.base_colors.reserve(keep.size());
    out.raw_opacities.reserve(keep.size());
    out.sh_rest.reserve(keep.size() * w);
    for (int idx : keep) {
        const auto i = static_cast<std::size_t>(idx);
        out.positions.push_back(positions[i]);
        out.log_scales.push_back(log_scales[i]);
        out.rotations.push_back(rotations[i]);
        out.base_colors.push_back(base_colors[i]);
        out.raw_opacities.push_back(raw_opacities[i]);
        out.sh_rest.insert(out.sh_rest.end(), sh_rest.begin() + i * w, sh_rest.begin() + (i + 1) * w);
    }
    return out;
}

void CameraView::validate() const {
    if (width < 1 || height < 1) {
        throw InvalidParameterError("camera dimensions must be >= 1");
    }
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(fx) ||
        !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw InvalidParameterError("non-finite camera parameters");
    }
    const Mat3 err = rotation * rotation.transpose() - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-6) {
        throw InvalidParameterError("camera rotation is not orthonormal");
    }
    if (gt_image) {
        if (gt_image->width != width || gt_image->height != height) {
            throw ShapeError("gt_image dimensions do not match camera");
        }
    }
}

Mat3 quat_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidParameterError("quaternion has zero or non-finite norm");
    }
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

CovarianceDecomposition build_covariance(const Vec3& log_scale, const Vec4& quaternion) {
    if (!log_scale.allFinite() || !quaternion.allFinite()) {
        throw InvalidParameterError("non-finite covariance parameters");
    }
    CovarianceDecomposition out;
    out.R = quat_to_rotation(quaternion);
    out.S = log_scale.array().exp().matrix().asDiagonal();
    const Mat3 v = out.R * out.S;
    out.Sigma = v * v.transpose();
    return out;
}

CovarianceJacobian covariance_jacobian(const Vec3& log_scale, const Vec4& quaternion) {
    const double norm = quaternion.norm();
    if (!(norm > 0.0)) {
        throw InvalidParameterError("quaternion has zero norm");
    }
    const Vec4 qn = quaternion / norm;
    const Mat3 r = quat_to_rotation(quaternion);
    const Vec3 s = log_scale.array().exp();
    const Mat3 s2 = (s.array() * s.array()).matrix().asDiagonal();

    CovarianceJacobian jac;
    // d Sigma / d log_scale_k = 2 s_k^2 r_k r_k^T (r_k = k-th column of R).
    for (int k = 0; k < 3; ++k) {
        const Vec3 rk = r.col(k);
        jac.d_sigma_d_log_scale[k] = 2.0 * s[k] * s[k] * (rk * rk.transpose());
    }
    // Through the normalized quaternion, then through normalization.
    const auto d_rot = rotation_quat_derivatives(qn);
    std::array<Mat3, 4> d_sigma_d_qn;
    for (int m = 0; m < 4; ++m) {
        const Mat3 t = d_rot[m] * s2 * r.transpose();
        d_sigma_d_qn[m] = t + t.transpose();
    }
    for (int k = 0; k < 4; ++k) {
        Mat3 acc = Mat3::Zero();
        for (int m = 0; m < 4; ++m) {
            const double dqn = ((m == k ? 1.0 : 0.0) - qn[m] * qn[k]) / norm;
            acc += d_sigma_d_qn[m] * dqn;
        }
        jac.d_sigma_d_quat[k] = acc;
    }
    return jac;
}

void sh_basis(const Vec3& dir, int degree, double* out) {
    const double x = dir[0], y = dir[1], z = dir[2];
    if (degree >= 1) {
        out[0] = -kShC1 * y;
        out[1] = kShC1 * z;
        out[2] = -kShC1 * x;
    }
    if (degree >= 2) {
        const double xx = x * x, yy = y * y, zz = z * z;
        out[3] = kShC2[0] * x * y;
        out[4] = kShC2[1] * y * z;
        out[5] = kShC2[2] * (2 * zz - xx - yy);
        out[6] = kShC2[3] * x * z;
        out[7] = kShC2[4] * (xx - yy);
    }
    if (degree >= 3) {
        const double xx = x * x, yy = y * y, zz = z * z;
        out[8] = kShC3[0] * y * (3 * xx - yy);
        out[9] = kShC3[1] * x * y * z;
        out[10] = kShC3[2] * y * (4 * zz - xx - yy);
        out[11] = kShC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
        out[12] = kShC3[4] * x * (4 * zz - xx - yy);
        out[13] = kShC3[5] * z * (xx - yy);
        out[14] = kShC3[6] * x * (xx - yy - 3 * zz);
    }
}

namespace {

// Basis gradients with respect to the direction, rows matching sh_basis order.
void sh_basis_gradient(const Vec3& dir, int degree, Vec3* out) {
    const double x = dir[0], y = dir[1], z = dir[2];
    if (degree >= 1) {
        out[0] = Vec3(0, -kShC1, 0);
        out[1] = Vec3(0, 0, kShC1);
        out[2] = Vec3(-kShC1, 0, 0);
    }
    if (degree >= 2) {
        out[3] = kShC2[0] * Vec3(y, x, 0);
        out[4] = kShC2[1] * Vec3(0, z, y);
        out[5] = kShC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
        out[6] = kShC2[3] * Vec3(z, 0, x);
        out[7] = kShC2[4] * Vec3(2 * x, -2 * y, 0);
    }
    if (degree >= 3) {
        const double xx = x * x, yy = y * y, zz = z * z;
        out[8] = kShC3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
        out[9] = kShC3[1] * Vec3(y * z, x * z, x * y);
        out[10] = kShC3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
        out[11] = kShC3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
        out[12] = kShC3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
        out[13] = kShC3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
        out[14] = kShC3[6] * Vec3(3 * xx - yy - 3 * zz, -2 * x * y, -6 * x * z);
    }
}

void check_sh_shape(std::span<const double> sh_rest, int degree) {
    if (degree < 0 || degree > 3) {
        throw InvalidParameterError("SH degree must be in 0..3");
    }
    const std::size_t expected = 3 * static_cast<std::size_t>((degree + 1) * (degree + 1) - 1);
    if (sh_rest.size() != expected) {
        throw ShapeError("sh_rest length " + std::to_string(sh_rest.size()) +
                         " does not match degree " + std::to_string(degree));
    }
}

} // namespace

Vec3 eval_sh(const Vec3& base_color, std::span<const double> sh_rest, const Vec3& view_dir,
             int degree) {
    check_sh_shape(sh_rest, degree);
    Vec3 rgb = kShC0 * base_color;
    if (degree > 0) {
        double basis[15];
        sh_basis(view_dir, degree, basis);
        const int count = (degree + 1) * (degree + 1) - 1;
        for (int k = 0; k < count; ++k) {
            for (int c = 0; c < 3; ++c) {
                rgb[c] += basis[k] * sh_rest[static_cast<std::size_t>(k) * 3 + c];
            }
        }
    }
    rgb.array() += 0.5;
    return rgb.cwiseMax(0.0);
}

ShEval eval_sh_with_gradient(const Vec3& base_color, std::span<const double> sh_rest,
                             const Vec3& view_dir, int degree) {
    check_sh_shape(sh_rest, degree);
    ShEval out;
    out.rgb = kShC0 * base_color;
    out.d_rgb_d_dir = Mat3::Zero();
    if (degree > 0) {
        double basis[15];
        Vec3 grad[15];
        sh_basis(view_dir, degree, basis);
        sh_basis_gradient(view_dir, degree, grad);
        const int count = (degree + 1) * (degree + 1) - 1;
        for (int k = 0; k < count; ++k) {
            for (int c = 0; c < 3; ++c) {
                const double coeff = sh_rest[static_cast<std::size_t>(k) * 3 + c];
                out.rgb[c] += basis[k] * coeff;
                out.d_rgb_d_dir.row(c) += coeff * grad[k].transpose();
            }
        }
    }
    out.rgb.array() += 0.5;
    for (int c = 0; c < 3; ++c) {
        if (out.rgb[c] < 0.0) {
            out.rgb[c] = 0.0;
            out.d_rgb_d_dir.row(c).setZero();
            out.clamp_mask |= 1u << c;
        }
    }
    return out;
}

} // namespace splat
