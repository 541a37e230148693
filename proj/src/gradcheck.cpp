#include "splatprune/gradients.hpp"
#include "splatprune/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splat {

namespace {

CameraView probe_camera() {
    CameraView cam;
    cam.fx = cam.fy = 12.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;
    return cam;
}

GaussianCloud random_scene(Rng& rng, int n, int degree, const CameraView& cam) {
    GaussianCloud cloud;
    cloud.sh_degree = degree;
    const int rest_w = 3 * ((degree + 1) * (degree + 1) - 1);
    for (int i = 0; i < n; ++i) {
        const double z = rng.uniform(1.6, 3.0);
        const double px = rng.uniform(2.0, 6.0);
        const double py = rng.uniform(2.0, 6.0);
        cloud.positions.push_back(Vec3((px - cam.cx) * z / cam.fx, (py - cam.cy) * z / cam.fy, z));
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

bool scene_clears_margins(const GaussianCloud& cloud, const CameraView& cam,
                          const RenderConfig& cfg) {
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
            return false;
        }
        fps.push_back({p->mean2d, p->cov2d_inv, p->opacity, p->depth});
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

struct FdTarget {
    ParamArray array;
    int component;
    double scale; // analytic column * scale = finite-difference column
};

FdTarget fd_target(ParamSet set, int col) {
    if (set == ParamSet::Rgb) {
        return {ParamArray::BaseColor, col, kShC0};
    }
    if (col < 3) {
        return {ParamArray::Position, col, 1.0};
    }
    if (col < 6) {
        return {ParamArray::LogScale, col - 3, 1.0};
    }
    return {ParamArray::Rotation, col - 6, 1.0};
}

} // namespace

GradCheckReport run_gradient_check(int scenes, int max_gaussians, std::uint64_t seed, double step,
                                   double rel_tol, double abs_floor) {
    GradCheckReport report;
    const RenderConfig cfg;
    const CameraView cam = probe_camera();
    std::uint64_t scene_seed = seed;
    for (int s = 0; s < scenes; ++s) {
        GaussianCloud cloud;
        for (;; ++scene_seed) {
            Rng rng(scene_seed);
            const int n = 2 + static_cast<int>(rng.uniform_index(
                                  static_cast<std::uint64_t>(std::max(1, max_gaussians - 1))));
            cloud = random_scene(rng, n, s % 2, cam);
            if (scene_clears_margins(cloud, cam, cfg)) {
                ++scene_seed;
                break;
            }
        }
        ++report.scenes;

        for (const ParamSet set : {ParamSet::MeanScale, ParamSet::MeanScaleRot, ParamSet::Rgb}) {
            const int dim = param_dim(set);
            // Dense analytic table.
            std::vector<double> table(cloud.size() * cam.height * cam.width * 3 *
                                          static_cast<std::size_t>(dim),
                                      0.0);
            auto slot = [&](int g, int r, int c, int ch, int col) -> double& {
                return table[((((static_cast<std::size_t>(g) * cam.height + r) * cam.width + c) *
                                   3 +
                               ch) *
                                  dim +
                              col)];
            };
            render_with_param_jacobians(cloud, cam, 1, set, [&](const PixelJacobian& pj) {
                for (int ch = 0; ch < 3; ++ch) {
                    for (int col = 0; col < pj.dim; ++col) {
                        slot(pj.gaussian_index, pj.row, pj.col, ch, col) = pj.jac(ch, col);
                    }
                }
            });
            for (std::size_t g = 0; g < cloud.size(); ++g) {
                for (int col = 0; col < dim; ++col) {
                    const FdTarget target = fd_target(set, col);
                    const Image fd = finite_difference_jacobian(cloud, cam, 1, target.array, g,
                                                                target.component, step, cfg);
                    for (int r = 0; r < cam.height; ++r) {
                        for (int c = 0; c < cam.width; ++c) {
                            for (int ch = 0; ch < 3; ++ch) {
                                const double analytic =
                                    slot(static_cast<int>(g), r, c, ch, col) * target.scale;
                                const double reference = fd.at(r, c, ch);
                                const double err = std::abs(analytic - reference);
                                const double allowed = std::max(
                                    abs_floor,
                                    rel_tol * std::max(std::abs(analytic), std::abs(reference)));
                                ++report.comparisons;
                                report.max_error = std::max(report.max_error, err / allowed);
                                if (err > allowed) {
                                    ++report.failures;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return report;
}

} // namespace splat
