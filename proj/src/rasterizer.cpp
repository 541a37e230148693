#include "splatprune/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace splat {

namespace {

// Influence radius in Mahalanobis units: beyond it a fully opaque Gaussian
// falls below the alpha skip threshold, so truncating there matches the skip
// rule exactly and the footprint cutoff introduces no discontinuity.
double influence_radius(const RenderConfig& cfg) {
    if (cfg.alpha_skip <= 0.0) {
        return 6.0;
    }
    return 1.01 * std::sqrt(2.0 * std::log(1.0 / cfg.alpha_skip));
}

struct Eigen2 {
    double lo;
    double hi;
};

Eigen2 eigenvalues_2x2(const Mat2& m) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return {tr / 2.0 - disc, tr / 2.0 + disc};
}

} // namespace

CameraView scaled_camera(const CameraView& cam, int divisor) {
    if (divisor != 1 && divisor != 2 && divisor != 4 && divisor != 8) {
        throw InvalidParameterError("resolution divisor must be one of {1,2,4,8}");
    }
    if (divisor == 1) {
        return cam;
    }
    CameraView out = cam;
    out.gt_image.reset();
    const double inv = 1.0 / divisor;
    out.fx *= inv;
    out.fy *= inv;
    out.cx *= inv;
    out.cy *= inv;
    out.width = (cam.width + divisor - 1) / divisor;
    out.height = (cam.height + divisor - 1) / divisor;
    return out;
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianCloud& cloud, std::size_t index,
                                                  const CameraView& cam, const RenderConfig& cfg,
                                                  RenderStats* stats) {
    const Vec3 t = cam.to_camera(cloud.positions[index]);
    if (!(t.z() > cfg.near_plane)) {
        return std::nullopt;
    }

    const double inv_z = 1.0 / t.z();
    ProjectedGaussian out;
    out.cam_point = t;
    out.depth = t.z();
    out.source_index = static_cast<int>(index);
    out.opacity = cloud.activated_opacity(index);
    out.mean2d = Vec2(cam.fx * t.x() * inv_z + cam.cx, cam.fy * t.y() * inv_z + cam.cy);

    const Mat3 sigma = build_covariance(cloud.log_scales[index], cloud.rotations[index]).Sigma;
    Mat23 jproj;
    jproj << cam.fx * inv_z, 0.0, -cam.fx * t.x() * inv_z * inv_z,
        0.0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;
    const Mat23 a = jproj * cam.rotation;
    out.cov2d = a * sigma * a.transpose();
    out.cov2d += cfg.dilation * Mat2::Identity();

    const auto eig = eigenvalues_2x2(out.cov2d);
    if (!(eig.lo > 0.0) || eig.hi / eig.lo > cfg.condition_limit) {
        if (stats) {
            ++stats->skipped_singular;
        }
        return std::nullopt;
    }
    const double det = out.cov2d(0, 0) * out.cov2d(1, 1) - out.cov2d(0, 1) * out.cov2d(1, 0);
    out.cov2d_inv << out.cov2d(1, 1) / det, -out.cov2d(0, 1) / det,
        -out.cov2d(1, 0) / det, out.cov2d(0, 0) / det;

    const double radius = influence_radius(cfg);
    const double ext_x = radius * std::sqrt(out.cov2d(0, 0));
    const double ext_y = radius * std::sqrt(out.cov2d(1, 1));
    // Pixel (r,c) samples at center (c+0.5, r+0.5).
    out.col_min = std::max(0, static_cast<int>(std::ceil(out.mean2d.x() - ext_x - 0.5)));
    out.col_max = std::min(cam.width - 1, static_cast<int>(std::floor(out.mean2d.x() + ext_x - 0.5)));
    out.row_min = std::max(0, static_cast<int>(std::ceil(out.mean2d.y() - ext_y - 0.5)));
    out.row_max = std::min(cam.height - 1, static_cast<int>(std::floor(out.mean2d.y() + ext_y - 0.5)));
    if (out.col_min > out.col_max || out.row_min > out.row_max) {
        return std::nullopt;
    }

    Vec3 dir = cloud.positions[index] - cam.camera_center();
    const double dn = dir.norm();
    dir = dn > 0.0 ? Vec3(dir / dn) : Vec3(0.0, 0.0, 1.0);
    const auto sh = eval_sh_with_gradient(
        cloud.base_colors[index],
        std::span<const double>(cloud.sh_rest_for(index), static_cast<std::size_t>(cloud.sh_rest_width())),
        dir, cloud.sh_degree);
    out.view_color = sh.rgb;
    out.color_clamp_mask = sh.clamp_mask;
    return out;
}

std::vector<int> depth_sort(const std::vector<ProjectedGaussian>& projected) {
    std::vector<int> order(projected.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (projected[a].depth != projected[b].depth) {
            return projected[a].depth < projected[b].depth;
        }
        return projected[a].source_index < projected[b].source_index;
    });
    return order;
}

namespace {

std::vector<ProjectedGaussian> project_and_sort(const GaussianCloud& cloud, const CameraView& cam,
                                                const RenderConfig& cfg, RenderStats* stats) {
    std::vector<ProjectedGaussian> projected;
    projected.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (auto p = project_gaussian(cloud, i, cam, cfg, stats)) {
            projected.push_back(std::move(*p));
        }
    }
    const auto order = depth_sort(projected);
    std::vector<ProjectedGaussian> sorted;
    sorted.reserve(projected.size());
    for (int idx : order) {
        sorted.push_back(std::move(projected[idx]));
    }
    return sorted;
}

template <bool kRecord>
void composite(const std::vector<ProjectedGaussian>& sorted, const CameraView& cam,
               const RenderConfig& cfg, Image& out, std::vector<double>& transmittance,
               std::vector<std::uint32_t>* offsets, std::vector<Contribution>* contribs) {
    const int w = cam.width;
    const int h = cam.height;
    out = Image(w, h);
    transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
    if constexpr (kRecord) {
        offsets->assign(static_cast<std::size_t>(w) * h + 1, 0);
        contribs->clear();
    }

    std::vector<int> row_list;
    row_list.reserve(sorted.size());
    for (int r = 0; r < h; ++r) {
        row_list.clear();
        for (std::size_t g = 0; g < sorted.size(); ++g) {
            // Opacity below the skip threshold can never pass the alpha test.
            if (sorted[g].row_min <= r && r <= sorted[g].row_max &&
                sorted[g].opacity >= cfg.alpha_skip) {
                row_list.push_back(static_cast<int>(g));
            }
        }
        for (int c = 0; c < w; ++c) {
            double t = 1.0;
            Vec3 color = Vec3::Zero();
            for (int gi : row_list) {
                if (t < cfg.transmittance_stop) {
                    break;
                }
                const ProjectedGaussian& g = sorted[gi];
                if (c < g.col_min || c > g.col_max) {
                    continue;
                }
                const double dx = (c + 0.5) - g.mean2d.x();
                const double dy = (r + 0.5) - g.mean2d.y();
                double power = -0.5 * (g.cov2d_inv(0, 0) * dx * dx + g.cov2d_inv(1, 1) * dy * dy) -
                               g.cov2d_inv(0, 1) * dx * dy;
                if (power > 0.0) {
                    power = 0.0;
                }
                double alpha = g.opacity * std::exp(power);
                if (alpha > cfg.alpha_clamp) {
                    alpha = cfg.alpha_clamp;
                }
                if (alpha < cfg.alpha_skip) {
                    continue;
                }
                if constexpr (kRecord) {
                    contribs->push_back({gi, alpha, t});
                }
                color += g.view_color * (alpha * t);
                t *= 1.0 - alpha;
            }
            color += t * cfg.background;
            const std::size_t px = static_cast<std::size_t>(r) * w + c;
            out.at(r, c, 0) = color[0];
            out.at(r, c, 1) = color[1];
            out.at(r, c, 2) = color[2];
            transmittance[px] = t;
            if constexpr (kRecord) {
                (*offsets)[px + 1] = static_cast<std::uint32_t>(contribs->size());
            }
        }
    }
}

} // namespace

RenderedImage render_view(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                          const RenderConfig& cfg, RenderStats* stats) {
    const CameraView scaled = scaled_camera(cam, divisor);
    const auto sorted = project_and_sort(cloud, scaled, cfg, stats);
    RenderedImage out;
    out.resolution_divisor = divisor;
    composite<false>(sorted, scaled, cfg, out.rgb, out.final_transmittance, nullptr, nullptr);
    for (double& v : out.rgb.data) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

ForwardRecord render_with_record(const GaussianCloud& cloud, const CameraView& cam, int divisor,
                                 const RenderConfig& cfg, RenderStats* stats) {
    ForwardRecord rec;
    rec.cam = scaled_camera(cam, divisor);
    rec.divisor = divisor;
    rec.projected = project_and_sort(cloud, rec.cam, cfg, stats);
    composite<true>(rec.projected, rec.cam, cfg, rec.image, rec.final_transmittance, &rec.offsets,
                    &rec.contribs);
    return rec;
}

std::vector<long> count_hits(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                             int divisor, const RenderConfig& cfg) {
    std::vector<long> hits(cloud.size(), 0);
    for (const CameraView& view : views) {
        const ForwardRecord rec = render_with_record(cloud, view, divisor, cfg);
        for (const Contribution& c : rec.contribs) {
            ++hits[static_cast<std::size_t>(rec.projected[c.proj_index].source_index)];
        }
    }
    return hits;
}

} // namespace splat
