#pragma once

#include <optional>
#include <span>
#include <vector>

#include "slmetro/geometry.hpp"
#include "slmetro/image.hpp"

namespace slmetro {

// Plane a x + b y + c z + d = 0 with unit normal (a,b,c); d in mm.
struct Plane {
    double a = 0.0;
    double b = 0.0;
    double c = 1.0;
    double d = 0.0;

    double signed_distance(const Vec3 &p) const {
        return a * p.x() + b * p.y() + c * p.z() + d;
    }
    Vec3 normal() const { return {a, b, c}; }
    Plane flipped() const { return {-a, -b, -c, -d}; }
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

struct Circle2 {
    Vec2 center = Vec2::Zero();
    double radius = 0.0; // pixels
    double score = 0.0;  // accumulator votes
};

// Organized point cloud: one 3D point per camera pixel plus validity mask.
struct PointGrid {
    int width = 0;
    int height = 0;
    std::vector<Vec3> points;
    std::vector<uint8_t> valid;

    PointGrid() = default;
    PointGrid(int w, int h)
        : width(w), height(h), points(static_cast<size_t>(w) * h, Vec3::Zero()),
          valid(static_cast<size_t>(w) * h, 0) {}

    size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
    const Vec3 &at(int x, int y) const { return points[index(x, y)]; }
    Vec3 &at(int x, int y) { return points[index(x, y)]; }
    size_t count_valid() const;
    std::vector<Vec3> valid_points() const;
};

// Orthogonal-distance (total) least-squares plane. Throws DegenerateInput
// for fewer than min_count points or collinear input. The normal sign is
// canonical (largest-magnitude component positive).
Plane fit_plane(std::span<const Vec3> points, int min_count = 3);

// Flips the plane so that ref lies on the positive side.
Plane oriented_toward(const Plane &pl, const Vec3 &ref);

// Unsigned point-to-plane distance (plane has unit normal).
double point_plane_distance(const Vec3 &p, const Plane &pl);

// Algebraic least-squares sphere followed by damped Gauss-Newton
// refinement of the orthogonal residuals. Throws DegenerateInput for
// fewer than 4 points or coplanar input.
Sphere fit_sphere(std::span<const Vec3> points);

struct HoughParams {
    double grad_threshold = 60.0;   // Sobel magnitude gate for edge pixels
    int min_votes = 20;             // accumulator peak threshold
    double min_center_dist = 0.0;   // peak separation; 0 means use r_min
    double radius_step = 0.5;       // voting step along the gradient
    bool refine_intensity = true;   // darkness-centroid subpixel refinement
};

// Gradient-voting circular Hough transform. Returns circles sorted by
// descending score; an empty list is a valid result.
std::vector<Circle2> hough_circles(const Image8 &image, double r_min, double r_max,
                                   const HoughParams &params = {});

// Invalidates grid pixels within radius_factor * r of any circle center.
PointGrid mask_circle_regions(const PointGrid &grid, const std::vector<Circle2> &circles,
                              double radius_factor);

struct GridComponent {
    std::vector<size_t> pixel_indices;
    std::vector<Vec3> points;
};

// Valid points with signed height above pl exceeding the threshold,
// grouped by 8-connectivity, sorted by size descending.
std::vector<GridComponent> segment_above_plane(const PointGrid &grid, const Plane &pl,
                                               double height_threshold);

// Bilinear interpolation of grid points at a subpixel position; falls
// back to the nearest valid neighbor when the 2x2 cell is incomplete.
std::optional<Vec3> grid_interpolate(const PointGrid &grid, const Vec2 &pixel);

} // namespace slmetro
