#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable numeric input.
struct InvalidParameterError : Error {
    using Error::Error;
};

/// Array dimensions do not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

/// Malformed file content (PLY, JSON, PNG).
struct ParseError : Error {
    using Error::Error;
};

/// Sensitivity scoring failed (e.g. non-finite Fisher block).
struct ScoringError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

/// H x W x 3 image, row-major, linear RGB. Values are doubles; rendering
/// clamps to [0,1] only at output boundaries.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data; // height * width * 3

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    double& at(int row, int col, int ch) {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }
    double at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
};

/// Single-channel image (residual maps, transmittance dumps).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const {
        return data[static_cast<std::size_t>(row) * width + col];
    }
};

} // namespace splat
