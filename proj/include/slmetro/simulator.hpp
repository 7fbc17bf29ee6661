#pragma once

#include <cstdint>
#include <vector>

#include "slmetro/calibration.hpp"
#include "slmetro/fitting.hpp"
#include "slmetro/metrics.hpp"
#include "slmetro/pattern_codec.hpp"

namespace slmetro {

enum class SceneKind { Flat, Block, Balls, Pins };

struct NoiseModel {
    double sigma_z = 0.0;       // depth noise along the viewing ray, mm
    double sigma_i = 0.0;       // image intensity noise, 8-bit counts
    double outlier_rate = 0.0;  // fraction of pixels replaced by uniform depth
    int smoothing_kernel = 0;   // 0 = off; odd >= 3 applies one box pass
    uint64_t seed = 0;
};

struct WorkingRange {
    double reference_depth = 400.0; // mm from the camera
    double half_range = 20.0;       // usable depth-of-field half-width
};

struct PoseJitter {
    double max_rot_deg = 1.0;
    double max_shift = 2.0; // in-plane, mm
};

// Analytic scene: a bounded base flat plus the artifact solids for one
// benchmark criterion, posed in the camera frame.
struct Scene {
    SceneKind kind = SceneKind::Flat;
    ArtifactSpec artifact;
    Pose artifact_to_camera;
    WorkingRange range;

    std::vector<Vec2> marker_centers;   // Flat
    Vec2 block_center = Vec2::Zero();   // Block
    std::vector<Vec3> ball_centers;     // Balls, artifact frame (z = radius)
    std::vector<Vec2> pin_centers;      // Pins
    std::vector<double> pin_tip_offsets;

    double flat_albedo = 0.9;
    double ink_albedo = 0.2;
    double ink_feather = 0.15; // mm, soft ink edge

    bool has_solids() const { return kind != SceneKind::Flat; }
};

// Deterministic scene for one trial placement. depth_offset is relative
// to the working-range reference depth; throws OutOfWorkingRange when it
// exceeds the configured half-range. pin_spread injects a zero-mean
// checkerboard tip-height spread (Pins scenes only).
Scene build_scene(const ArtifactSpec &spec, const WorkingRange &range, double depth_offset,
                  const PoseJitter &jitter, SceneKind kind, uint64_t seed,
                  double pin_spread = 0.0);

struct TraceResult {
    bool hit = false;
    Vec3 point = Vec3::Zero(); // camera frame
    double proj_col = 0.0;     // projector pixel column of the hit
    double proj_row = 0.0;
    bool proj_visible = false;
    double ink = 0.0; // ink coverage in [0,1]
};

// Nearest ray-surface intersection for one camera pixel, with the hit's
// projector coordinates and shadow visibility.
TraceResult trace_pixel(const Scene &scene, const Calibration &calib, const Vec2 &pixel);

struct RenderedStack {
    CaptureStack stack;
    Image8 texture;
};

// Camera captures of every pattern frame plus a full-illumination
// texture image.
RenderedStack render_stack(const Scene &scene, const Calibration &calib,
                           const PatternStack &patterns, const NoiseModel &noise);

// Texture image only (cheap path for the metric evaluations).
Image8 render_texture(const Scene &scene, const Calibration &calib, const NoiseModel &noise);

// Ground-truth hits perturbed along the viewing ray; bypasses image
// rendering and decoding.
PointGrid synthesize_grid(const Scene &scene, const Calibration &calib,
                          const NoiseModel &noise);

// Box average of each valid pixel over its valid neighbors; validity
// unchanged. kernel_size must be odd and >= 3.
PointGrid smooth_grid(const PointGrid &grid, int kernel_size);

// Ground-truth pin tip centers in the camera frame.
std::vector<Vec3> pin_tip_points(const Scene &scene);

} // namespace slmetro
