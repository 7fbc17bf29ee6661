#pragma once

#include <string>
#include <vector>

#include "slmetro/fitting.hpp"
#include "slmetro/image.hpp"
#include "slmetro/pattern_codec.hpp"

namespace slmetro {

// Binary (P5) 8-bit PGM.
Image8 read_pgm(const std::string &path);
void write_pgm(const Image8 &img, const std::string &path);

// Organized grid as binary little-endian PLY with a per-vertex validity
// flag; width/height carried in header comments.
void write_grid_ply(const PointGrid &grid, const std::string &path);
PointGrid read_grid_ply(const std::string &path);

// Unorganized point list, same vertex layout without the grid comments.
void write_points_ply(const std::vector<Vec3> &points, const std::string &path);
std::vector<Vec3> read_points_ply(const std::string &path);

// True when the PLY carries grid dimensions.
bool ply_is_grid(const std::string &path);

// Frame directory manifest for pattern and capture stacks.
void write_stack_manifest(const std::string &dir, const CodecConfig &cfg,
                          const std::vector<FrameMeta> &meta,
                          const std::vector<std::string> &files);

struct StackManifest {
    CodecConfig codec;
    std::vector<FrameMeta> meta;
    std::vector<std::string> files; // relative to the manifest directory
};

StackManifest read_stack_manifest(const std::string &dir);

// Loads every frame listed in the manifest of dir.
CaptureStack load_capture_stack(const std::string &dir, CodecConfig *cfg_out = nullptr);

} // namespace slmetro
