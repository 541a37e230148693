#pragma once

#include "splatprune/scene.hpp"

#include <string>

namespace splat {

/// Reads a binary little-endian PLY with the 3D-GS property layout
/// (x,y,z, nx,ny,nz, f_dc_0..2, f_rest_*, opacity, scale_0..2, rot_0..3, all
/// float32). Normals are discarded; unknown properties are rejected. Stored
/// values are kept bit-exact; quaternions are normalized wherever a rotation
/// is built, not here.
GaussianCloud load_ply(const std::string& path);

/// Writes the exact inverse format (zero normals). Returns bytes written.
std::size_t save_ply(const GaussianCloud& cloud, const std::string& path);

/// Byte length save_ply would produce, without touching the filesystem.
std::size_t ply_byte_size(const GaussianCloud& cloud);

/// Same, from the Gaussian count and SH degree alone.
std::size_t ply_byte_size_for(std::size_t count, int sh_degree);

} // namespace splat
