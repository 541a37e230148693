#include "splatprune/toy_scene.hpp"

#include "splatprune/rasterizer.hpp"
#include "splatprune/rng.hpp"

#include <algorithm>
#include <cmath>

namespace splat {

namespace {

CameraView ring_camera(int index, int count, int resolution, double radius) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double azimuth = two_pi * index / count;
    // Elevated ring looking down at the slab of signals, so the views mostly
    // see every signal instead of stacks of them.
    const double elevations[3] = {0.6, 0.9, 1.2};
    const double elevation = elevations[index % 3];
    const Vec3 center(radius * std::cos(azimuth) * std::cos(elevation),
                      radius * std::sin(azimuth) * std::cos(elevation),
                      radius * std::sin(elevation));
    const Vec3 forward = (-center).normalized(); // look at the origin
    const Vec3 up(0.0, 0.0, 1.0);
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right).normalized();

    CameraView cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * center;
    cam.fx = cam.fy = 2.0 * resolution;
    cam.cx = cam.cy = resolution / 2.0;
    cam.width = cam.height = resolution;
    return cam;
}

Vec3 color_to_base(const Vec3& view_color) { return (view_color.array() - 0.5) / kShC0; }

} // namespace

SceneBundle generate_toy_scene(const ToySceneSpec& spec) {
    if (spec.signal_count < 0 || spec.clutter_count < 0 || spec.view_count < 0) {
        throw InvalidParameterError("toy scene counts must be >= 0");
    }
    if (spec.resolution < 16) {
        throw InvalidParameterError("toy scene resolution must be >= 16");
    }
    if (spec.clutter_count > 0 && spec.clutter_kinds.empty()) {
        throw InvalidParameterError("clutter requested but no clutter kinds given");
    }

    Rng rng(spec.seed);
    SceneBundle bundle;
    bundle.sh_degree = 0;
    bundle.cloud.sh_degree = 0;

    // Stratified slab placement: one jittered xy cell per signal with a thin
    // z extent, so the elevated cameras see each signal instead of stacks.
    const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(
                                      static_cast<double>(std::max(spec.signal_count, 1))))));
    const double cell = 1.0 / grid;
    GaussianCloud& cloud = bundle.cloud;
    for (int i = 0; i < spec.signal_count; ++i) {
        const int ix = i % grid;
        const int iy = i / grid;
        const Vec3 center(-0.5 + (ix + 0.5) * cell, -0.5 + (iy + 0.5) * cell, 0.0);
        Vec3 jitter = rng.uniform_vec3(-0.3 * cell, 0.3 * cell);
        jitter[2] = rng.uniform(-0.08, 0.08);
        cloud.positions.push_back(center + jitter);
        const double smin = 0.7 * cell;
        const double smax = 0.85 * cell;
        cloud.log_scales.push_back(Vec3(std::log(rng.uniform(smin, smax)),
                                        std::log(rng.uniform(smin, smax)),
                                        std::log(rng.uniform(smin, smax))));
        cloud.rotations.push_back(rng.unit_quaternion());
        cloud.base_colors.push_back(color_to_base(rng.uniform_vec3(0.15, 0.85)));
        cloud.raw_opacities.push_back(inverse_sigmoid(rng.uniform(0.65, 0.9)));
    }

    const double ring_radius = 2.3;
    for (int v = 0; v < spec.view_count; ++v) {
        bundle.views.push_back(ring_camera(v, std::max(spec.view_count, 1), spec.resolution,
                                           ring_radius));
    }

    // Plan the clutter before rendering ground truth: hosts of occluded
    // clutter are bumped to high opacity so the buried copy stays hidden.
    struct ClutterPlan {
        ClutterKind kind;
        std::size_t host = 0;
        Vec3 position = Vec3::Zero();
        Vec3 log_scale = Vec3::Zero();
        Vec4 rotation = Vec4(1, 0, 0, 0);
        Vec3 base_color = Vec3::Zero();
        double logit = 0.0;
        Vec3 jitter = Vec3::Zero();
    };
    std::vector<ClutterPlan> plan;
    for (int i = 0; i < spec.clutter_count; ++i) {
        ClutterPlan item;
        item.kind = spec.clutter_kinds[i % spec.clutter_kinds.size()];
        if (item.kind == ClutterKind::Transparent || spec.signal_count == 0) {
            item.kind = ClutterKind::Transparent;
            item.position = rng.uniform_vec3(-0.5, 0.5);
            item.position[2] = rng.uniform(-0.1, 0.1);
            item.log_scale = Vec3(std::log(rng.uniform(0.04, 0.1)),
                                  std::log(rng.uniform(0.04, 0.1)),
                                  std::log(rng.uniform(0.04, 0.1)));
            item.rotation = rng.unit_quaternion();
            item.base_color = color_to_base(rng.uniform_vec3(0.1, 0.9));
            item.logit = rng.uniform(-8.0, -6.5);
        } else {
            item.host = rng.uniform_index(static_cast<std::uint64_t>(spec.signal_count));
            item.jitter = rng.unit_vec3();
        }
        plan.push_back(item);
    }
    for (const ClutterPlan& item : plan) {
        if (item.kind == ClutterKind::Occluded) {
            cloud.raw_opacities[item.host] =
                std::max(cloud.raw_opacities[item.host], inverse_sigmoid(0.88));
        }
    }

    RenderConfig render_cfg;
    render_cfg.background = bundle.background;
    for (CameraView& view : bundle.views) {
        view.gt_image = render_view(cloud, view, 1, render_cfg).rgb;
    }

    for (const ClutterPlan& item : plan) {
        if (item.kind == ClutterKind::Transparent) {
            cloud.positions.push_back(item.position);
            cloud.log_scales.push_back(item.log_scale);
            cloud.rotations.push_back(item.rotation);
            cloud.base_colors.push_back(item.base_color);
            cloud.raw_opacities.push_back(item.logit);
            continue;
        }
        const Vec3 host_scale = cloud.log_scales[item.host].array().exp();
        if (item.kind == ClutterKind::Occluded) {
            // Buried just camera-side of the core of an opaque host, with the
            // host's exact color: nearly invisible itself, but it shadows the
            // host's sensitivity until a pruning round removes it.
            cloud.positions.push_back(cloud.positions[item.host] +
                                      0.08 * host_scale.cwiseProduct(item.jitter));
            cloud.log_scales.push_back(cloud.log_scales[item.host].array() - std::log(3.0));
            cloud.rotations.push_back(cloud.rotations[item.host]);
            cloud.base_colors.push_back(cloud.base_colors[item.host]);
            cloud.raw_opacities.push_back(inverse_sigmoid(0.4));
        } else { // Duplicate
            cloud.positions.push_back(cloud.positions[item.host] +
                                      0.2 * host_scale.cwiseProduct(item.jitter));
            cloud.log_scales.push_back(cloud.log_scales[item.host].array() - std::log(2.0));
            cloud.rotations.push_back(cloud.rotations[item.host]);
            cloud.base_colors.push_back(cloud.base_colors[item.host]);
            cloud.raw_opacities.push_back(inverse_sigmoid(0.1));
        }
    }
    cloud.sh_rest.clear(); // degree 0

    // Scene extent follows the camera rig: max distance from the centroid.
    if (!bundle.views.empty()) {
        Vec3 centroid = Vec3::Zero();
        for (const CameraView& v : bundle.views) {
            centroid += v.camera_center();
        }
        centroid /= static_cast<double>(bundle.views.size());
        double radius = 0.0;
        for (const CameraView& v : bundle.views) {
            radius = std::max(radius, (v.camera_center() - centroid).norm());
        }
        bundle.scene_extent = 1.1 * radius;
    }
    return bundle;
}

} // namespace splat
