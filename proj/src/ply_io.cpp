#include "splatprune/ply_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace splat {

namespace {

std::vector<std::string> expected_properties(int rest_count) {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz",
                                      "f_dc_0", "f_dc_1", "f_dc_2"};
    for (int i = 0; i < rest_count; ++i) {
        names.push_back("f_rest_" + std::to_string(i));
    }
    names.insert(names.end(), {"opacity", "scale_0", "scale_1", "scale_2",
                               "rot_0", "rot_1", "rot_2", "rot_3"});
    return names;
}

int degree_for_rest_count(int rest_count) {
    switch (rest_count) {
    case 0: return 0;
    case 9: return 1;
    case 24: return 2;
    case 45: return 3;
    default:
        throw ParseError("unsupported f_rest property count " + std::to_string(rest_count));
    }
}

void write_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw IoError("cannot open " + tmp + " for writing");
        }
        file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!file.good()) {
            throw IoError("failed writing " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

std::string build_header(std::size_t count, int rest_count) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << count << "\n";
    for (const std::string& name : expected_properties(rest_count)) {
        header << "property float " << name << "\n";
    }
    header << "end_header\n";
    return header.str();
}

void append_float(std::string& out, double v) {
    const float f = static_cast<float>(v);
    char buf[4];
    std::memcpy(buf, &f, 4);
    out.append(buf, 4);
}

} // namespace

GaussianCloud load_ply(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path);
    }

    std::string line;
    if (!std::getline(file, line) || line != "ply") {
        throw ParseError(path + ": missing 'ply' magic");
    }
    bool format_seen = false;
    std::size_t count = 0;
    bool element_seen = false;
    std::vector<std::string> properties;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line == "end_header") {
            break;
        }
        std::istringstream words(line);
        std::string keyword;
        words >> keyword;
        if (keyword == "comment" || keyword.empty()) {
            continue;
        }
        if (keyword == "format") {
            std::string kind, version;
            words >> kind >> version;
            if (kind != "binary_little_endian" || version != "1.0") {
                throw ParseError(path + ": expected binary_little_endian 1.0, got " + line);
            }
            format_seen = true;
        } else if (keyword == "element") {
            std::string name;
            words >> name >> count;
            if (name != "vertex" || element_seen) {
                throw ParseError(path + ": only a single 'vertex' element is supported");
            }
            element_seen = true;
        } else if (keyword == "property") {
            std::string type, name;
            words >> type >> name;
            if (type != "float") {
                throw ParseError(path + ": property '" + name + "' is not float32");
            }
            properties.push_back(name);
        } else {
            throw ParseError(path + ": unexpected header line '" + line + "'");
        }
    }
    if (!format_seen || !element_seen) {
        throw ParseError(path + ": incomplete header");
    }

    int rest_count = 0;
    for (const std::string& name : properties) {
        if (name.rfind("f_rest_", 0) == 0) {
            ++rest_count;
        }
    }
    const std::vector<std::string> expected = expected_properties(rest_count);
    // Offsets by name; every expected property must be present exactly once
    // and nothing else may appear.
    std::vector<int> offset_of(expected.size(), -1);
    for (std::size_t slot = 0; slot < properties.size(); ++slot) {
        bool known = false;
        for (std::size_t e = 0; e < expected.size(); ++e) {
            if (properties[slot] == expected[e]) {
                if (offset_of[e] != -1) {
                    throw ParseError(path + ": duplicate property '" + properties[slot] + "'");
                }
                offset_of[e] = static_cast<int>(slot);
                known = true;
                break;
            }
        }
        if (!known) {
            throw ParseError(path + ": unknown property '" + properties[slot] + "'");
        }
    }
    for (std::size_t e = 0; e < expected.size(); ++e) {
        if (offset_of[e] == -1) {
            throw ParseError(path + ": missing property '" + expected[e] + "'");
        }
    }

    const std::size_t stride = properties.size();
    std::vector<float> payload(count * stride);
    file.read(reinterpret_cast<char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (static_cast<std::size_t>(file.gcount()) != payload.size() * sizeof(float)) {
        throw ParseError(path + ": truncated payload");
    }

    const int degree = degree_for_rest_count(rest_count);
    const int coeffs = rest_count / 3;
    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.positions.resize(count);
    cloud.log_scales.resize(count);
    cloud.rotations.resize(count);
    cloud.base_colors.resize(count);
    cloud.raw_opacities.resize(count);
    cloud.sh_rest.resize(count * static_cast<std::size_t>(rest_count));

    auto fetch = [&](std::size_t element, std::size_t expected_index, const char* name) {
        const double v = payload[element * stride + static_cast<std::size_t>(offset_of[expected_index])];
        if (!std::isfinite(v)) {
            throw ParseError(path + ": non-finite value for property '" + name + "' at element " +
                             std::to_string(element));
        }
        return v;
    };

    for (std::size_t i = 0; i < count; ++i) {
        std::size_t e = 0;
        for (int k = 0; k < 3; ++k) {
            cloud.positions[i][k] = fetch(i, e, expected[e].c_str());
            ++e;
        }
        e += 3; // normals discarded, still validated below
        for (int k = 0; k < 3; ++k) {
            const std::size_t slot = e - 3 + static_cast<std::size_t>(k);
            const double v = payload[i * stride + static_cast<std::size_t>(offset_of[slot])];
            if (!std::isfinite(v)) {
                throw ParseError(path + ": non-finite value for property '" + expected[slot] +
                                 "' at element " + std::to_string(i));
            }
        }
        for (int k = 0; k < 3; ++k) {
            cloud.base_colors[i][k] = fetch(i, e, expected[e].c_str());
            ++e;
        }
        for (int k = 0; k < rest_count; ++k) {
            // File stores channel-major (f_rest_{c*coeffs+b}); memory is
            // coefficient-major [b*3+c].
            const int c = k / coeffs;
            const int b = k % coeffs;
            cloud.sh_rest[i * static_cast<std::size_t>(rest_count) +
                          static_cast<std::size_t>(b) * 3 + static_cast<std::size_t>(c)] =
                fetch(i, e, expected[e].c_str());
            ++e;
        }
        cloud.raw_opacities[i] = fetch(i, e, expected[e].c_str());
        ++e;
        for (int k = 0; k < 3; ++k) {
            cloud.log_scales[i][k] = fetch(i, e, expected[e].c_str());
            ++e;
        }
        for (int k = 0; k < 4; ++k) {
            cloud.rotations[i][k] = fetch(i, e, expected[e].c_str());
            ++e;
        }
        if (cloud.rotations[i].norm() < 1e-12) {
            throw ParseError(path + ": zero quaternion at element " + std::to_string(i));
        }
    }
    return cloud;
}

namespace {

std::string serialize_ply(const GaussianCloud& cloud) {
    cloud.validate();
    const int rest_count = cloud.sh_rest_width();
    const int coeffs = cloud.sh_coeff_count();
    std::string out = build_header(cloud.size(), rest_count);
    out.reserve(out.size() + cloud.size() * (static_cast<std::size_t>(rest_count) + 17) * 4);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            append_float(out, cloud.positions[i][k]);
        }
        for (int k = 0; k < 3; ++k) {
            append_float(out, 0.0); // normals
        }
        for (int k = 0; k < 3; ++k) {
            append_float(out, cloud.base_colors[i][k]);
        }
        for (int c = 0; c < 3; ++c) {
            for (int b = 0; b < coeffs; ++b) {
                append_float(out, cloud.sh_rest[i * static_cast<std::size_t>(rest_count) +
                                                static_cast<std::size_t>(b) * 3 +
                                                static_cast<std::size_t>(c)]);
            }
        }
        append_float(out, cloud.raw_opacities[i]);
        for (int k = 0; k < 3; ++k) {
            append_float(out, cloud.log_scales[i][k]);
        }
        for (int k = 0; k < 4; ++k) {
            append_float(out, cloud.rotations[i][k]);
        }
    }
    return out;
}

} // namespace

std::size_t save_ply(const GaussianCloud& cloud, const std::string& path) {
    const std::string bytes = serialize_ply(cloud);
    write_atomic(path, bytes);
    return bytes.size();
}

std::size_t ply_byte_size(const GaussianCloud& cloud) {
    return ply_byte_size_for(cloud.size(), cloud.sh_degree);
}

std::size_t ply_byte_size_for(std::size_t count, int sh_degree) {
    const int rest_count = 3 * ((sh_degree + 1) * (sh_degree + 1) - 1);
    return build_header(count, rest_count).size() +
           count * (static_cast<std::size_t>(rest_count) + 17) * 4;
}

} // namespace splat
