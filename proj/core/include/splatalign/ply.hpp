#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatalign/gaussian.hpp"

namespace splatalign {

// Reads the de-facto 3DGS asset layout: an ASCII header declaring
// `format binary_little_endian 1.0` and a vertex element carrying at least
// x y z f_dc_0..2 opacity scale_0..2 rot_0..3. Other vertex properties
// (normals, f_rest_*, ...) are skipped by size. Required properties may be
// float or double; everything is stored as float.
//
// Errors: ParseError (malformed header, names the line), SchemaError (a
// required property is missing or unsupported), SizeMismatchError (payload
// size disagrees with the header), EmptyCloudError (zero vertices).
GaussianCloud parse_ply(std::span<const std::byte> bytes,
                        std::string source_id = {});

std::vector<std::byte> write_ply(const GaussianCloud& cloud);

GaussianCloud read_ply_file(const std::filesystem::path& path);
void write_ply_file(const GaussianCloud& cloud, const std::filesystem::path& path);

// Whole-file helpers shared by the binary formats.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::byte> bytes);

}  // namespace splatalign
