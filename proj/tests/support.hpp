// Test-only oracles and generators. The renderer and SSIM here are written
// directly from the math, independent of the library code paths they check.
#pragma once

#include "splatprune/rasterizer.hpp"
#include "splatprune/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace splat::testing {

// ---------------------------------------------------------------------------
// Direct scalar implementation of the compositing equation: per pixel, walk
// every Gaussian in depth order and blend. No footprint truncation, no shared
// kernels with the production rasterizer.
// ---------------------------------------------------------------------------

inline Mat3 oracle_quat_to_rotation(Vec4 q) {
    q /= std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r(0, 0) = 1 - 2 * (y * y + z * z);
    r(0, 1) = 2 * (x * y - w * z);
    r(0, 2) = 2 * (x * z + w * y);
    r(1, 0) = 2 * (x * y + w * z);
    r(1, 1) = 1 - 2 * (x * x + z * z);
    r(1, 2) = 2 * (y * z - w * x);
    r(2, 0) = 2 * (x * z - w * y);
    r(2, 1) = 2 * (y * z + w * x);
    r(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

inline Vec3 oracle_sh_color(const GaussianCloud& cloud, std::size_t i, const Vec3& dir) {
    // Real SH expansion, 3D-GS convention, written out independently.
    const double c0 = 0.28209479177387814;
    const double c1 = 0.4886025119029199;
    const double c2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
    const double c3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};
    const double x = dir[0], y = dir[1], z = dir[2];
    const double xx = x * x, yy = y * y, zz = z * z;
    double basis[15];
    int count = 0;
    if (cloud.sh_degree >= 1) {
        basis[0] = -c1 * y;
        basis[1] = c1 * z;
        basis[2] = -c1 * x;
        count = 3;
    }
    if (cloud.sh_degree >= 2) {
        basis[3] = c2[0] * x * y;
        basis[4] = c2[1] * y * z;
        basis[5] = c2[2] * (2 * zz - xx - yy);
        basis[6] = c2[3] * x * z;
        basis[7] = c2[4] * (xx - yy);
        count = 8;
    }
    if (cloud.sh_degree >= 3) {
        basis[8] = c3[0] * y * (3 * xx - yy);
        basis[9] = c3[1] * x * y * z;
        basis[10] = c3[2] * y * (4 * zz - xx - yy);
        basis[11] = c3[3] * z * (2 * zz - 3 * xx - 3 * yy);
        basis[12] = c3[4] * x * (4 * zz - xx - yy);
        basis[13] = c3[5] * z * (xx - yy);
        basis[14] = c3[6] * x * (xx - yy - 3 * zz);
        count = 15;
    }
    Vec3 rgb = c0 * cloud.base_colors[i];
    for (int k = 0; k < count; ++k) {
        for (int c = 0; c < 3; ++c) {
            rgb[c] += basis[k] * cloud.sh_rest[i * static_cast<std::size_t>(3 * count) +
                                               static_cast<std::size_t>(k) * 3 +
                                               static_cast<std::size_t>(c)];
        }
    }
    rgb.array() += 0.5;
    return rgb.cwiseMax(0.0);
}

inline Image oracle_render(const GaussianCloud& cloud, const CameraView& cam_full, int divisor,
                           const RenderConfig& cfg = {}, bool clamp_output = true) {
    CameraView cam = cam_full;
    cam.fx /= divisor;
    cam.fy /= divisor;
    cam.cx /= divisor;
    cam.cy /= divisor;
    cam.width = (cam_full.width + divisor - 1) / divisor;
    cam.height = (cam_full.height + divisor - 1) / divisor;

    struct Term {
        double depth;
        std::size_t index;
        Vec2 mean;
        Mat2 inv;
        double opacity;
        Vec3 color;
    };
    std::vector<Term> terms;
    const Vec3 center = -cam.rotation.transpose() * cam.translation;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 t = cam.rotation * cloud.positions[i] + cam.translation;
        if (!(t[2] > cfg.near_plane)) {
            continue;
        }
        const Mat3 r = oracle_quat_to_rotation(cloud.rotations[i]);
        Mat3 sigma = Mat3::Zero();
        for (int k = 0; k < 3; ++k) {
            const double s = std::exp(cloud.log_scales[i][k]);
            sigma += s * s * r.col(k) * r.col(k).transpose();
        }
        Eigen::Matrix<double, 2, 3> jproj;
        jproj << cam.fx / t[2], 0, -cam.fx * t[0] / (t[2] * t[2]),
            0, cam.fy / t[2], -cam.fy * t[1] / (t[2] * t[2]);
        const Eigen::Matrix<double, 2, 3> a = jproj * cam.rotation;
        Mat2 m = a * sigma * a.transpose();
        m(0, 0) += cfg.dilation;
        m(1, 1) += cfg.dilation;
        const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        if (!(det > 0.0)) {
            continue;
        }
        Term term;
        term.depth = t[2];
        term.index = i;
        term.mean = Vec2(cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy);
        term.inv << m(1, 1) / det, -m(0, 1) / det, -m(1, 0) / det, m(0, 0) / det;
        term.opacity = 1.0 / (1.0 + std::exp(-cloud.raw_opacities[i]));
        Vec3 dir = cloud.positions[i] - center;
        const double dn = dir.norm();
        term.color = oracle_sh_color(cloud, i, dn > 0 ? Vec3(dir / dn) : Vec3(0, 0, 1));
        terms.push_back(term);
    }
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
        return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
    });

    Image out(cam.width, cam.height);
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            double t = 1.0;
            Vec3 color = Vec3::Zero();
            for (const Term& term : terms) {
                if (t < cfg.transmittance_stop) {
                    break;
                }
                const Vec2 d(c + 0.5 - term.mean[0], r + 0.5 - term.mean[1]);
                double power = -0.5 * d.dot(term.inv * d);
                if (power > 0.0) {
                    power = 0.0;
                }
                const double alpha = std::min(term.opacity * std::exp(power), cfg.alpha_clamp);
                if (alpha < cfg.alpha_skip) {
                    continue;
                }
                color += term.color * alpha * t;
                t *= 1.0 - alpha;
            }
            color += t * cfg.background;
            for (int ch = 0; ch < 3; ++ch) {
                out.at(r, c, ch) = clamp_output ? std::clamp(color[ch], 0.0, 1.0) : color[ch];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Direct windowed SSIM: explicit 11x11 loops, no separable filtering.
// ---------------------------------------------------------------------------

inline double reference_ssim(const Image& a, const Image& b) {
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double kernel[11][11];
    double ksum = 0.0;
    for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
            const double di = i - 5, dj = j - 5;
            kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    }
    for (auto& row : kernel) {
        for (double& v : row) {
            v /= ksum;
        }
    }
    double total = 0.0;
    long windows = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 5; r < a.height - 5; ++r) {
            for (int c = 5; c < a.width - 5; ++c) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < 11; ++i) {
                    for (int j = 0; j < 11; ++j) {
                        const double va = a.at(r + i - 5, c + j - 5, ch);
                        const double vb = b.at(r + i - 5, c + j - 5, ch);
                        mu_a += kernel[i][j] * va;
                        mu_b += kernel[i][j] * vb;
                        aa += kernel[i][j] * va * va;
                        bb += kernel[i][j] * vb * vb;
                        ab += kernel[i][j] * va * vb;
                    }
                }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

// ---------------------------------------------------------------------------
// Spearman rank correlation (average ranks on ties).
// ---------------------------------------------------------------------------

inline std::vector<double> ranks(const std::vector<double>& values) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<double> out(values.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            out[order[k]] = rank;
        }
        i = j + 1;
    }
    return out;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::vector<double> rx = ranks(xs);
    const std::vector<double> ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Random scenes for gradient checks, with margins away from the rasterizer's
// decision thresholds so central differences stay on one side of each.
// ---------------------------------------------------------------------------

struct GradcheckScene {
    GaussianCloud cloud;
    CameraView cam;
};

inline CameraView small_camera() {
    CameraView cam;
    cam.fx = cam.fy = 12.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;
    return cam;
}

inline GaussianCloud random_cloud_for_camera(Rng& rng, int n, int degree, const CameraView& cam) {
    GaussianCloud cloud;
    cloud.sh_degree = degree;
    const int rest_w = 3 * ((degree + 1) * (degree + 1) - 1);
    for (int i = 0; i < n; ++i) {
        const double z = rng.uniform(1.6, 3.0);
        const double px = rng.uniform(2.0, 6.0);
        const double py = rng.uniform(2.0, 6.0);
        cloud.positions.push_back(
            Vec3((px - cam.cx) * z / cam.fx, (py - cam.cy) * z / cam.fy, z));
        cloud.log_scales.push_back(Vec3(std::log(rng.uniform(0.12, 0.45)),
                                        std::log(rng.uniform(0.12, 0.45)),
                                        std::log(rng.uniform(0.12, 0.45))));
        cloud.rotations.push_back(rng.unit_quaternion());
        cloud.base_colors.push_back(rng.uniform_vec3(-0.8, 0.8));
        cloud.raw_opacities.push_back(rng.uniform() < 0.3 ? 5.5 : rng.uniform(-1.5, 2.0));
        for (int k = 0; k < rest_w; ++k) {
            cloud.sh_rest.push_back(rng.uniform(-0.15, 0.15));
        }
    }
    return cloud;
}

/// Rejects scenes where any per-pixel alpha, transmittance value, or pre-clamp
/// SH channel sits within a margin of one of the thresholds (alpha skip,
/// alpha clamp, transmittance stop, color clamp).
inline bool gradcheck_scene_ok(const GaussianCloud& cloud, const CameraView& cam,
                               const RenderConfig& cfg = {}) {
    struct Footprint {
        Vec2 mean;
        Mat2 inv;
        double opacity;
        double depth;
    };
    std::vector<Footprint> fps;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto p = project_gaussian(cloud, i, cam, cfg);
        if (!p) {
            return false; // keep gradcheck scenes fully visible
        }
        fps.push_back({p->mean2d, p->cov2d_inv, p->opacity, p->depth});
        // Pre-clamp SH channels must be firmly positive.
        Vec3 dir = cloud.positions[i] - cam.camera_center();
        dir.normalize();
        Vec3 pre = kShC0 * cloud.base_colors[i];
        if (cloud.sh_degree > 0) {
            double basis[15];
            sh_basis(dir, cloud.sh_degree, basis);
            for (int k = 0; k < cloud.sh_coeff_count(); ++k) {
                for (int c = 0; c < 3; ++c) {
                    pre[c] += basis[k] *
                              cloud.sh_rest[i * static_cast<std::size_t>(cloud.sh_rest_width()) +
                                            static_cast<std::size_t>(k) * 3 +
                                            static_cast<std::size_t>(c)];
                }
            }
        }
        pre.array() += 0.5;
        if (pre.minCoeff() < 1e-3) {
            return false;
        }
    }
    // Near-equal depths could reorder under a finite-difference step.
    for (std::size_t a = 0; a < fps.size(); ++a) {
        for (std::size_t b = a + 1; b < fps.size(); ++b) {
            if (std::abs(fps[a].depth - fps[b].depth) < 1e-3) {
                return false;
            }
        }
    }
    std::vector<int> order(fps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fps[a].depth < fps[b].depth; });

    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            double t = 1.0;
            for (int gi : order) {
                const Footprint& f = fps[gi];
                const Vec2 d(c + 0.5 - f.mean[0], r + 0.5 - f.mean[1]);
                const double alpha_raw = f.opacity * std::exp(-0.5 * d.dot(f.inv * d));
                if (std::abs(alpha_raw - cfg.alpha_skip) < 5e-5 ||
                    std::abs(alpha_raw - cfg.alpha_clamp) < 1e-3) {
                    return false;
                }
                if (t < cfg.transmittance_stop) {
                    break;
                }
                const double alpha = std::min(alpha_raw, cfg.alpha_clamp);
                if (alpha < cfg.alpha_skip) {
                    continue;
                }
                t *= 1.0 - alpha;
                if (std::abs(t - cfg.transmittance_stop) < 1e-5) {
                    return false;
                }
            }
        }
    }
    return true;
}

/// Deterministic sequence of margin-checked scenes: walks seeds from
/// `first_seed` until one passes the filter.
inline GradcheckScene make_gradcheck_scene(std::uint64_t first_seed, int n, int degree) {
    for (std::uint64_t seed = first_seed;; ++seed) {
        Rng rng(seed);
        GradcheckScene scene;
        scene.cam = small_camera();
        scene.cloud = random_cloud_for_camera(rng, n, degree, scene.cam);
        if (gradcheck_scene_ok(scene.cloud, scene.cam)) {
            return scene;
        }
    }
}

/// Random cloud with float32-representable values (for PLY round trips).
inline GaussianCloud random_float_cloud(Rng& rng, int n, int degree) {
    auto f = [&](double lo, double hi) {
        return static_cast<double>(static_cast<float>(rng.uniform(lo, hi)));
    };
    GaussianCloud cloud;
    cloud.sh_degree = degree;
    const int rest_w = 3 * ((degree + 1) * (degree + 1) - 1);
    for (int i = 0; i < n; ++i) {
        cloud.positions.push_back(Vec3(f(-5, 5), f(-5, 5), f(-5, 5)));
        cloud.log_scales.push_back(Vec3(f(-4, 1), f(-4, 1), f(-4, 1)));
        Vec4 q = rng.unit_quaternion();
        for (int k = 0; k < 4; ++k) {
            q[k] = static_cast<double>(static_cast<float>(q[k]));
        }
        cloud.rotations.push_back(q);
        cloud.base_colors.push_back(Vec3(f(-2, 2), f(-2, 2), f(-2, 2)));
        cloud.raw_opacities.push_back(f(-6, 6));
        for (int k = 0; k < rest_w; ++k) {
            cloud.sh_rest.push_back(f(-1, 1));
        }
    }
    return cloud;
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

} // namespace splat::testing
