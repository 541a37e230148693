#include "splatprune/gradients.hpp"

#include "splatprune/metrics.hpp"

#include <cmath>

namespace splat {

namespace {

// Per-Gaussian, per-view quantities shared by every pixel the Gaussian
// touches: the projection Jacobian, the camera-space covariance, and the
// derivatives of Sigma with respect to the raw shape parameters.
struct GaussGeometry {
    Mat23 jproj; // perspective Jacobian at the mean
    Mat23 a; // jproj * W
    Mat3 z; // W Sigma W^T
    CovarianceJacobian cov_jac;
    Mat3 d_color_d_pos; // through the SH view direction; rows = channels
    double basis[15];
    double raw_opacity = 0.0;
};

GaussGeometry make_geometry(const GaussianCloud& cloud, const ProjectedGaussian& g,
                            const CameraView& cam, bool with_color_path, bool with_cov_path) {
    GaussGeometry geom;
    const std::size_t i = static_cast<std::size_t>(g.source_index);
    const Vec3& t = g.cam_point;
    const double inv_z = 1.0 / t.z();
    geom.jproj << cam.fx * inv_z, 0.0, -cam.fx * t.x() * inv_z * inv_z,
        0.0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;
    geom.a = geom.jproj * cam.rotation;
    geom.raw_opacity = cloud.raw_opacities[i];
    if (with_cov_path) {
        const Mat3 sigma = build_covariance(cloud.log_scales[i], cloud.rotations[i]).Sigma;
        geom.z = cam.rotation * sigma * cam.rotation.transpose();
        geom.cov_jac = covariance_jacobian(cloud.log_scales[i], cloud.rotations[i]);
    }
    geom.d_color_d_pos = Mat3::Zero();
    if (with_color_path) {
        Vec3 dir = cloud.positions[i] - cam.camera_center();
        const double dn = dir.norm();
        if (dn > 0.0) {
            dir /= dn;
            const auto sh = eval_sh_with_gradient(
                cloud.base_colors[i],
                std::span<const double>(cloud.sh_rest_for(i),
                                        static_cast<std::size_t>(cloud.sh_rest_width())),
                dir, cloud.sh_degree);
            const Mat3 proj = (Mat3::Identity() - dir * dir.transpose()) / dn;
            geom.d_color_d_pos = sh.d_rgb_d_dir * proj;
        }
        if (cloud.sh_degree > 0) {
            Vec3 dirn = cloud.positions[i] - cam.camera_center();
            const double n2 = dirn.norm();
            sh_basis(n2 > 0.0 ? Vec3(dirn / n2) : Vec3(0, 0, 1), cloud.sh_degree, geom.basis);
        }
    }
    return geom;
}

// Contraction of a 2x3 gradient with dJ/dt for the perspective Jacobian.
Vec3 jproj_backward(const Mat23& g_j, const Vec3& t, double fx, double fy) {
    const double inv_z = 1.0 / t.z();
    const double inv_z2 = inv_z * inv_z;
    const double inv_z3 = inv_z2 * inv_z;
    Vec3 g_t;
    g_t[0] = g_j(0, 2) * (-fx * inv_z2);
    g_t[1] = g_j(1, 2) * (-fy * inv_z2);
    g_t[2] = g_j(0, 0) * (-fx * inv_z2) + g_j(0, 2) * (2.0 * fx * t.x() * inv_z3) +
             g_j(1, 1) * (-fy * inv_z2) + g_j(1, 2) * (2.0 * fy * t.y() * inv_z3);
    return g_t;
}

// d(power)/d(position) for one pixel: through the projected mean and through
// the position dependence of the perspective Jacobian.
Vec3 power_position_gradient(const GaussGeometry& geom, const ProjectedGaussian& g,
                             const CameraView& cam, const Vec2& v) {
    Vec3 grad = geom.a.transpose() * v;
    const Vec3 u = geom.z * (geom.jproj.transpose() * v);
    const Mat23 g_j = v * u.transpose();
    grad += cam.rotation.transpose() * jproj_backward(g_j, g.cam_point, cam.fx, cam.fy);
    return grad;
}

struct PixelWalkTerm {
    const Contribution* contrib;
    Vec3 d_color_d_alpha; // dC(p)/d(alpha_i), 3-vector
    double weight; // alpha_i * T_i
    bool alpha_clamped;
};

// Walks one pixel's contribution list back to front, handing each term's
// compositing derivatives to `fn`.
template <typename Fn>
void walk_pixel(const ForwardRecord& rec, std::size_t px, const RenderConfig& cfg, Fn&& fn) {
    const std::uint32_t begin = rec.offsets[px];
    const std::uint32_t end = rec.offsets[px + 1];
    Vec3 suffix = rec.final_transmittance[px] * cfg.background;
    for (std::uint32_t j = end; j > begin; --j) {
        const Contribution& c = rec.contribs[j - 1];
        const ProjectedGaussian& g = rec.projected[c.proj_index];
        PixelWalkTerm term;
        term.contrib = &c;
        term.weight = c.alpha * c.t_before;
        term.alpha_clamped = c.alpha >= cfg.alpha_clamp;
        term.d_color_d_alpha = g.view_color * c.t_before - suffix / (1.0 - c.alpha);
        fn(term, g);
        suffix += g.view_color * term.weight;
    }
}

} // namespace

RenderedImage render_with_param_jacobians(const GaussianCloud& cloud, const CameraView& cam,
                                          int divisor, ParamSet set, const JacobianSink& sink,
                                          const RenderConfig& cfg) {
    const ForwardRecord rec = render_with_record(cloud, cam, divisor, cfg);
    const int dim = param_dim(set);
    const bool geometric = set != ParamSet::Rgb;

    std::vector<GaussGeometry> geom(rec.projected.size());
    std::vector<char> have_geom(rec.projected.size(), 0);
    auto geometry_for = [&](int proj_index) -> const GaussGeometry& {
        if (!have_geom[proj_index]) {
            geom[proj_index] = make_geometry(cloud, rec.projected[proj_index], rec.cam,
                                             /*with_color_path=*/geometric,
                                             /*with_cov_path=*/geometric);
            have_geom[proj_index] = 1;
        }
        return geom[proj_index];
    };

    PixelJacobian out;
    out.dim = dim;
    const int w = rec.cam.width;
    for (int r = 0; r < rec.cam.height; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t px = static_cast<std::size_t>(r) * w + c;
            walk_pixel(rec, px, cfg, [&](const PixelWalkTerm& term, const ProjectedGaussian& g) {
                out.gaussian_index = g.source_index;
                out.row = r;
                out.col = c;
                out.jac.setZero();
                if (set == ParamSet::Rgb) {
                    out.jac(0, 0) = term.weight;
                    out.jac(1, 1) = term.weight;
                    out.jac(2, 2) = term.weight;
                } else {
                    const GaussGeometry& gg = geometry_for(term.contrib->proj_index);
                    if (!term.alpha_clamped) {
                        const double dx = (c + 0.5) - g.mean2d.x();
                        const double dy = (r + 0.5) - g.mean2d.y();
                        const Vec2 v = g.cov2d_inv * Vec2(dx, dy);
                        const Vec3 d_power_d_pos = power_position_gradient(gg, g, rec.cam, v);
                        const Vec3 y = gg.a.transpose() * v;
                        const double alpha = term.contrib->alpha;
                        for (int k = 0; k < 3; ++k) {
                            const double d_alpha = alpha * d_power_d_pos[k];
                            out.jac.col(k) = term.d_color_d_alpha * d_alpha;
                        }
                        for (int k = 0; k < 3; ++k) {
                            const double d_power =
                                0.5 * y.dot(gg.cov_jac.d_sigma_d_log_scale[k] * y);
                            out.jac.col(3 + k) = term.d_color_d_alpha * (alpha * d_power);
                        }
                        if (set == ParamSet::MeanScaleRot) {
                            for (int k = 0; k < 4; ++k) {
                                const double d_power =
                                    0.5 * y.dot(gg.cov_jac.d_sigma_d_quat[k] * y);
                                out.jac.col(6 + k) = term.d_color_d_alpha * (alpha * d_power);
                            }
                        }
                    }
                    // Position also moves the view direction feeding the SH color.
                    for (int k = 0; k < 3; ++k) {
                        out.jac.col(k) += term.weight * gg.d_color_d_pos.col(k);
                    }
                }
                sink(out);
            });
        }
    }

    RenderedImage rendered;
    rendered.resolution_divisor = divisor;
    rendered.rgb = rec.image;
    for (double& v : rendered.rgb.data) {
        v = std::clamp(v, 0.0, 1.0);
    }
    rendered.final_transmittance = rec.final_transmittance;
    return rendered;
}

void FullGradients::resize_zero(const GaussianCloud& cloud) {
    positions.assign(cloud.size(), Vec3::Zero());
    log_scales.assign(cloud.size(), Vec3::Zero());
    rotations.assign(cloud.size(), Vec4::Zero());
    base_colors.assign(cloud.size(), Vec3::Zero());
    sh_rest.assign(cloud.sh_rest.size(), 0.0);
    raw_opacities.assign(cloud.size(), 0.0);
}

LossResult loss_and_gradients(const GaussianCloud& cloud, const CameraView& cam,
                              double lambda_ssim, const RenderConfig& cfg) {
    if (!cam.gt_image) {
        throw InvalidParameterError("loss_and_gradients requires a ground-truth image");
    }
    if (!(lambda_ssim >= 0.0 && lambda_ssim < 1.0)) {
        throw InvalidParameterError("lambda_ssim must be in [0, 1)");
    }
    const Image& gt = *cam.gt_image;
    if (gt.width != cam.width || gt.height != cam.height) {
        throw ShapeError("ground-truth resolution does not match the camera");
    }

    const ForwardRecord rec = render_with_record(cloud, cam, 1, cfg);
    const Image& img = rec.image;

    LossResult result;
    const double inv_count = 1.0 / static_cast<double>(img.data.size());
    std::vector<double> d_loss_d_img(img.data.size(), 0.0);
    double l1 = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double diff = img.data[i] - gt.data[i];
        l1 += std::abs(diff);
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        d_loss_d_img[i] = (1.0 - lambda_ssim) * sign * inv_count;
    }
    l1 *= inv_count;
    result.l1 = l1;
    if (lambda_ssim > 0.0) {
        const SsimResult s = ssim_with_gradient(img, gt);
        result.ssim_value = s.value;
        for (std::size_t i = 0; i < d_loss_d_img.size(); ++i) {
            d_loss_d_img[i] -= lambda_ssim * s.d_value_d_a[i];
        }
        result.loss = (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - s.value);
    } else {
        result.loss = l1;
    }

    FullGradients& grads = result.gradients;
    grads.resize_zero(cloud);

    // Per-projected-Gaussian staging accumulated over pixels, then pushed
    // through projection/SH once per Gaussian.
    const std::size_t np = rec.projected.size();
    std::vector<Vec2> acc_mu(np, Vec2::Zero());
    std::vector<Mat2> acc_m(np, Mat2::Zero());
    std::vector<Vec3> acc_color(np, Vec3::Zero());
    std::vector<double> acc_logit(np, 0.0);
    std::vector<char> touched(np, 0);

    const int w = rec.cam.width;
    for (int r = 0; r < rec.cam.height; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t px = static_cast<std::size_t>(r) * w + c;
            const Vec3 adj(d_loss_d_img[px * 3], d_loss_d_img[px * 3 + 1],
                           d_loss_d_img[px * 3 + 2]);
            if (adj.isZero(0.0) && rec.offsets[px] == rec.offsets[px + 1]) {
                continue;
            }
            walk_pixel(rec, px, cfg, [&](const PixelWalkTerm& term, const ProjectedGaussian& g) {
                const int pi = term.contrib->proj_index;
                touched[pi] = 1;
                acc_color[pi] += term.weight * adj;
                if (!term.alpha_clamped) {
                    const double d_alpha = adj.dot(term.d_color_d_alpha);
                    const double alpha = term.contrib->alpha;
                    const double o = g.opacity;
                    acc_logit[pi] += d_alpha * alpha * (1.0 - o);
                    const double dx = (c + 0.5) - g.mean2d.x();
                    const double dy = (r + 0.5) - g.mean2d.y();
                    const Vec2 v = g.cov2d_inv * Vec2(dx, dy);
                    acc_mu[pi] += (d_alpha * alpha) * v;
                    acc_m[pi] += (0.5 * d_alpha * alpha) * (v * v.transpose());
                }
            });
        }
    }

    for (std::size_t pi = 0; pi < np; ++pi) {
        if (!touched[pi]) {
            continue;
        }
        const ProjectedGaussian& g = rec.projected[pi];
        const std::size_t src = static_cast<std::size_t>(g.source_index);
        const GaussGeometry gg = make_geometry(cloud, g, rec.cam, true, true);

        // Color path: base/sh coefficients and the view-direction term.
        Vec3 d_color = acc_color[pi];
        for (int ch = 0; ch < 3; ++ch) {
            if (g.color_clamp_mask & (1u << ch)) {
                d_color[ch] = 0.0;
            } else {
                grads.base_colors[src][ch] += kShC0 * d_color[ch];
            }
        }
        if (cloud.sh_degree > 0) {
            double* rest = grads.sh_rest.data() + src * static_cast<std::size_t>(cloud.sh_rest_width());
            for (int k = 0; k < cloud.sh_coeff_count(); ++k) {
                for (int ch = 0; ch < 3; ++ch) {
                    rest[k * 3 + ch] += gg.basis[k] * d_color[ch];
                }
            }
        }
        grads.positions[src] += gg.d_color_d_pos.transpose() * d_color;

        // Geometry path.
        const Mat2 m_sym = acc_m[pi];
        Vec3 d_t = gg.jproj.transpose() * acc_mu[pi];
        const Mat23 d_j = 2.0 * (m_sym * gg.jproj) * gg.z;
        d_t += jproj_backward(d_j, g.cam_point, rec.cam.fx, rec.cam.fy);
        grads.positions[src] += rec.cam.rotation.transpose() * d_t;

        const Mat3 d_sigma = gg.a.transpose() * m_sym * gg.a;
        for (int k = 0; k < 3; ++k) {
            grads.log_scales[src][k] +=
                (d_sigma.array() * gg.cov_jac.d_sigma_d_log_scale[k].array()).sum();
        }
        for (int k = 0; k < 4; ++k) {
            grads.rotations[src][k] +=
                (d_sigma.array() * gg.cov_jac.d_sigma_d_quat[k].array()).sum();
        }
        grads.raw_opacities[src] += acc_logit[pi];
    }
    return result;
}

Image finite_difference_jacobian(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                                 ParamArray array, std::size_t gaussian, int component,
                                 double step, const RenderConfig& cfg) {
    if (!(step > 0.0)) {
        throw InvalidParameterError("finite-difference step must be positive");
    }
    auto render_at = [&](double delta) {
        GaussianCloud c = cloud;
        switch (array) {
        case ParamArray::Position: c.positions[gaussian][component] += delta; break;
        case ParamArray::LogScale: c.log_scales[gaussian][component] += delta; break;
        case ParamArray::Rotation: c.rotations[gaussian][component] += delta; break;
        case ParamArray::BaseColor: c.base_colors[gaussian][component] += delta; break;
        case ParamArray::ShRest:
            c.sh_rest[gaussian * static_cast<std::size_t>(c.sh_rest_width()) + component] += delta;
            break;
        case ParamArray::Opacity: c.raw_opacities[gaussian] += delta; break;
        }
        return render_with_record(c, cam, divisor, cfg).image;
    };
    const Image plus = render_at(step);
    const Image minus = render_at(-step);
    Image out(plus.width, plus.height);
    const double inv = 1.0 / (2.0 * step);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (plus.data[i] - minus.data[i]) * inv;
    }
    return out;
}

} // namespace splat
