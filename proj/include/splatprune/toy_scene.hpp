#pragma once

#include "splatprune/scene.hpp"

namespace splat {

/// Kinds of low-value Gaussians a toy scene is salted with.
enum class ClutterKind {
    Transparent, // opacity logit <= -6
    Occluded, // buried inside an opaque signal Gaussian, matching color
    Duplicate, // jittered low-opacity copy of a signal Gaussian
};

struct ToySceneSpec {
    int signal_count = 64;
    int clutter_count = 64;
    int view_count = 20;
    int resolution = 64;
    std::uint64_t seed = 0;
    std::vector<ClutterKind> clutter_kinds = {ClutterKind::Transparent, ClutterKind::Occluded,
                                              ClutterKind::Duplicate};
};

/// Synthetic degree-0 scene: signal Gaussians in a unit box rendered from a
/// ring of cameras to produce the ground-truth images, then clutter injected
/// (cycling through clutter_kinds). Deterministic in the seed. Gaussian order
/// is signals first, clutter after.
SceneBundle generate_toy_scene(const ToySceneSpec& spec);

} // namespace splat
