#include "splatprune/dataset.hpp"

#include "splatprune/image_io.hpp"
#include "splatprune/ply_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace splat {

namespace fs = std::filesystem;

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream file(tmp, std::ios::trunc);
        if (!file) {
            throw IoError("cannot open " + tmp + " for writing");
        }
        file << text;
        if (!file.good()) {
            throw IoError("failed writing " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

void require_keys_subset(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& context) {
    if (!j.is_object()) {
        throw ParseError(context + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ParseError(context + ": unknown key '" + item.key() + "'");
        }
    }
}

namespace {

nlohmann::json camera_to_json(const CameraView& cam, const std::string& image_path) {
    nlohmann::json pose = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) {
        pose.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2),
                        cam.translation[r]});
    }
    nlohmann::json j{
        {"pose", std::move(pose)}, {"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
        {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height},
    };
    if (!image_path.empty()) {
        j["image"] = image_path;
    }
    return j;
}

CameraView camera_from_json(const nlohmann::json& j, const std::string& dir) {
    require_keys_subset(j, {"pose", "fx", "fy", "cx", "cy", "width", "height", "image"},
                        "camera");
    CameraView cam;
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 3) {
        throw ParseError("camera pose must be 3 rows");
    }
    for (int r = 0; r < 3; ++r) {
        const auto& row = pose[r];
        if (!row.is_array() || row.size() != 4) {
            throw ParseError("camera pose rows must have 4 entries");
        }
        for (int c = 0; c < 3; ++c) {
            cam.rotation(r, c) = row[c].get<double>();
        }
        cam.translation[r] = row[3].get<double>();
    }
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    if (j.contains("image")) {
        const fs::path img = fs::path(dir) / j.at("image").get<std::string>();
        if (fs::exists(img)) {
            cam.gt_image = load_png(img.string());
        }
    }
    cam.validate();
    return cam;
}

} // namespace

void save_scene(const SceneBundle& bundle, const std::string& dir, bool write_gt) {
    fs::create_directories(dir);
    save_ply(bundle.cloud, (fs::path(dir) / "point_cloud.ply").string());

    nlohmann::json cameras = nlohmann::json::array();
    for (std::size_t i = 0; i < bundle.views.size(); ++i) {
        std::string image_path;
        if (write_gt && bundle.views[i].gt_image) {
            char name[48];
            std::snprintf(name, sizeof(name), "images/view_%03zu.png", i);
            image_path = name;
        }
        cameras.push_back(camera_to_json(bundle.views[i], image_path));
    }
    write_text_atomic((fs::path(dir) / "cameras.json").string(), cameras.dump(2) + "\n");

    if (write_gt) {
        fs::create_directories(fs::path(dir) / "images");
        for (std::size_t i = 0; i < bundle.views.size(); ++i) {
            if (bundle.views[i].gt_image) {
                char name[48];
                std::snprintf(name, sizeof(name), "view_%03zu.png", i);
                save_png((fs::path(dir) / "images" / name).string(), *bundle.views[i].gt_image);
            }
        }
    }

    const nlohmann::json meta{
        {"schema_version", 1},
        {"background", {bundle.background[0], bundle.background[1], bundle.background[2]}},
        {"sh_degree", bundle.sh_degree},
        {"scene_extent", bundle.scene_extent},
    };
    write_text_atomic((fs::path(dir) / "scene.json").string(), meta.dump(2) + "\n");
}

SceneBundle load_scene(const std::string& dir) {
    SceneBundle bundle;
    bundle.cloud = load_ply((fs::path(dir) / "point_cloud.ply").string());

    std::ifstream cam_file(fs::path(dir) / "cameras.json");
    if (!cam_file) {
        throw IoError(dir + ": missing cameras.json");
    }
    nlohmann::json cameras;
    try {
        cam_file >> cameras;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(dir + "/cameras.json: " + e.what());
    }
    if (!cameras.is_array()) {
        throw ParseError(dir + "/cameras.json: expected an array");
    }
    for (const auto& j : cameras) {
        bundle.views.push_back(camera_from_json(j, dir));
    }

    std::ifstream meta_file(fs::path(dir) / "scene.json");
    if (meta_file) {
        nlohmann::json meta;
        try {
            meta_file >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(dir + "/scene.json: " + e.what());
        }
        require_keys_subset(meta, {"schema_version", "background", "sh_degree", "scene_extent"},
                            "scene.json");
        if (meta.contains("background")) {
            const auto& bg = meta.at("background");
            if (!bg.is_array() || bg.size() != 3) {
                throw ParseError("scene.json: background must have 3 entries");
            }
            bundle.background = Vec3(bg[0].get<double>(), bg[1].get<double>(), bg[2].get<double>());
        }
        if (meta.contains("sh_degree")) {
            bundle.sh_degree = meta.at("sh_degree").get<int>();
        }
        if (meta.contains("scene_extent")) {
            bundle.scene_extent = meta.at("scene_extent").get<double>();
        }
    } else {
        bundle.sh_degree = bundle.cloud.sh_degree;
    }
    if (bundle.sh_degree != bundle.cloud.sh_degree) {
        throw ParseError(dir + ": scene.json sh_degree disagrees with the PLY");
    }
    return bundle;
}

namespace {

RoundConfig round_from_json(const nlohmann::json& j) {
    require_keys_subset(j, {"percent", "refine_iters", "scorer", "divisor"}, "round");
    RoundConfig r;
    r.percent = j.at("percent").get<double>();
    if (j.contains("refine_iters")) {
        r.refine_iters = j.at("refine_iters").get<int>();
    }
    if (j.contains("scorer")) {
        try {
            r.scorer = scorer_from_name(j.at("scorer").get<std::string>());
        } catch (const InvalidParameterError& e) {
            throw ParseError(e.what());
        }
    }
    if (j.contains("divisor")) {
        r.divisor = j.at("divisor").get<int>();
    }
    return r;
}

nlohmann::json round_to_json(const RoundConfig& r) {
    return nlohmann::json{
        {"percent", r.percent},
        {"refine_iters", r.refine_iters},
        {"scorer", scorer_name(r.scorer)},
        {"divisor", r.divisor},
    };
}

OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
    require_keys_subset(j,
                        {"position_lr", "log_scale_lr", "rotation_lr", "color_lr", "opacity_lr",
                         "beta1", "beta2", "eps"},
                        "optimizer");
    OptimizerConfig o;
    if (j.contains("position_lr")) o.position_lr = j.at("position_lr").get<double>();
    if (j.contains("log_scale_lr")) o.log_scale_lr = j.at("log_scale_lr").get<double>();
    if (j.contains("rotation_lr")) o.rotation_lr = j.at("rotation_lr").get<double>();
    if (j.contains("color_lr")) o.color_lr = j.at("color_lr").get<double>();
    if (j.contains("opacity_lr")) o.opacity_lr = j.at("opacity_lr").get<double>();
    if (j.contains("beta1")) o.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) o.beta2 = j.at("beta2").get<double>();
    if (j.contains("eps")) o.eps = j.at("eps").get<double>();
    return o;
}

nlohmann::json optimizer_to_json(const OptimizerConfig& o) {
    return nlohmann::json{
        {"position_lr", o.position_lr}, {"log_scale_lr", o.log_scale_lr},
        {"rotation_lr", o.rotation_lr}, {"color_lr", o.color_lr},
        {"opacity_lr", o.opacity_lr},  {"beta1", o.beta1},
        {"beta2", o.beta2},            {"eps", o.eps},
    };
}

} // namespace

PipelineConfigFile config_from_json(const nlohmann::json& j) {
    require_keys_subset(j,
                        {"schema_version", "scene", "output", "rounds", "optimizer",
                         "lambda_ssim", "seed", "threads", "deterministic", "score_epsilon",
                         "divisor", "variant"},
                        "config");
    PipelineConfigFile c;
    if (j.contains("schema_version")) {
        c.schema_version = j.at("schema_version").get<int>();
        if (c.schema_version != 1) {
            throw ParseError("unsupported config schema_version " +
                             std::to_string(c.schema_version));
        }
    }
    if (j.contains("scene")) c.scene_dir = j.at("scene").get<std::string>();
    if (j.contains("output")) c.output_dir = j.at("output").get<std::string>();
    if (j.contains("rounds")) {
        for (const auto& r : j.at("rounds")) {
            c.rounds.push_back(round_from_json(r));
        }
    }
    if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
    if (j.contains("lambda_ssim")) c.lambda_ssim = j.at("lambda_ssim").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("deterministic")) c.deterministic = j.at("deterministic").get<bool>();
    if (j.contains("score_epsilon")) c.score_epsilon = j.at("score_epsilon").get<double>();
    if (j.contains("divisor")) c.divisor = j.at("divisor").get<int>();
    if (j.contains("variant")) {
        c.variant = j.at("variant").get<std::string>();
        try {
            scorer_from_name(c.variant); // validate
        } catch (const InvalidParameterError& e) {
            throw ParseError(e.what());
        }
    }
    return c;
}

nlohmann::json config_to_json(const PipelineConfigFile& c) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const RoundConfig& r : c.rounds) {
        rounds.push_back(round_to_json(r));
    }
    return nlohmann::json{
        {"schema_version", c.schema_version},
        {"scene", c.scene_dir},
        {"output", c.output_dir},
        {"rounds", std::move(rounds)},
        {"optimizer", optimizer_to_json(c.optimizer)},
        {"lambda_ssim", c.lambda_ssim},
        {"seed", c.seed},
        {"threads", c.threads},
        {"deterministic", c.deterministic},
        {"score_epsilon", c.score_epsilon},
        {"divisor", c.divisor},
        {"variant", c.variant},
    };
}

PipelineConfigFile load_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw IoError("cannot open " + path);
    }
    nlohmann::json j;
    try {
        file >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const PipelineConfigFile& config, const std::string& path) {
    write_text_atomic(path, config_to_json(config).dump(2) + "\n");
}

} // namespace splat
