#pragma once

#include "splatprune/pipeline.hpp"
#include "splatprune/scene.hpp"

#include "json.hpp"

#include <string>

namespace splat {

/// Writes a scene directory: point_cloud.ply, cameras.json, scene.json and
/// (optionally) images/view_###.png ground-truth renders.
void save_scene(const SceneBundle& bundle, const std::string& dir, bool write_gt = true);

/// Loads a scene directory written by save_scene (or hand-assembled in the
/// same layout). Ground-truth PNGs referenced from cameras.json are loaded
/// when present.
SceneBundle load_scene(const std::string& dir);

/// On-disk pipeline configuration. Parsing is strict: unknown keys anywhere
/// are rejected.
struct PipelineConfigFile {
    int schema_version = 1;
    std::string scene_dir;
    std::string output_dir;
    std::vector<RoundConfig> rounds;
    OptimizerConfig optimizer;
    double lambda_ssim = 0.2;
    std::uint64_t seed = 0;
    int threads = 0;
    bool deterministic = true;
    double score_epsilon = 1e-12;
    int divisor = 4; // for the standalone score command
    std::string variant = "mean-scale";
};

PipelineConfigFile config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfigFile& config);

PipelineConfigFile load_config(const std::string& path);
void save_config(const PipelineConfigFile& config, const std::string& path);

/// Strict-key helper shared by the JSON loaders.
void require_keys_subset(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& context);

void write_text_atomic(const std::string& path, const std::string& text);

} // namespace splat
