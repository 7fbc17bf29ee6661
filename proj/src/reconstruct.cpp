#include "slmetro/reconstruct.hpp"

#include <cmath>

#include "slmetro/parallel.hpp"

namespace slmetro {

namespace {

constexpr double kDegenerateTol = 1e-12;

Mat3 essential_matrix(const Pose &cam_to_proj) {
    const Vec3 &t = cam_to_proj.translation();
    Mat3 tx;
    tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    return tx * cam_to_proj.rotation();
}

} // namespace

Vec2 projector_point_from_column(const Vec2 &m_cam, double proj_col, const Calibration &calib) {
    if (!calib.projector_mode())
        throw InvalidConfig("projector calibration required for correspondence completion");
    const CameraModel &proj = *calib.projector;

    // Epipolar line of the camera ray in normalized projector coordinates.
    Vec3 l = essential_matrix(*calib.cam_to_proj) * Vec3(m_cam.x(), m_cam.y(), 1.0);
    if (std::abs(l.y()) < kDegenerateTol)
        throw DegenerateRays("epipolar line parallel to the projector column");

    // The decoded value fixes the projector pixel column; the row is the
    // epipolar intersection. With distortion, the undistorted point and the
    // pixel row depend on each other, so iterate: undistort at the current
    // row, solve the line for y, re-project for the next row estimate.
    double row = proj.intrinsics.v0;
    Vec2 m_proj = Vec2::Zero();
    for (int it = 0; it < 50; ++it) {
        Vec2 n = pixel_to_normalized(Vec2(proj_col, row), proj);
        double y = -(l.x() * n.x() + l.z()) / l.y();
        m_proj = Vec2(n.x(), y);
        Vec2 d = apply_distortion(m_proj, proj.distortion);
        double next = proj.intrinsics.fv * d.y() + proj.intrinsics.v0;
        if (std::abs(next - row) < 1e-10) {
            row = next;
            break;
        }
        row = next;
    }
    return m_proj;
}

PointGrid reconstruct_grid(const CorrespondenceMap &map, const Calibration &calib,
                           int workers) {
    if (!calib.projector_mode())
        throw InvalidConfig("projector calibration required for grid reconstruction");
    PointGrid grid(map.width, map.height);
    parallel_for(
        static_cast<size_t>(map.height),
        [&](size_t y) {
            for (int x = 0; x < map.width; ++x) {
                size_t i = y * static_cast<size_t>(map.width) + x;
                if (!map.valid[i])
                    continue;
                try {
                    Vec2 m_cam = pixel_to_normalized(
                        Vec2(static_cast<double>(x), static_cast<double>(y)), calib.camera);
                    Vec2 m_proj = projector_point_from_column(m_cam, map.proj_col[i], calib);
                    grid.points[i] = triangulate(m_cam, m_proj, *calib.cam_to_proj);
                    grid.valid[i] = 1;
                } catch (const Error &) {
                    // Degenerate pixel stays invalid.
                }
            }
        },
        workers);
    return grid;
}

PointGrid reconstruct_laser(const Image8 &image, const Calibration &calib,
                            double intensity_threshold) {
    if (!calib.laser_mode())
        throw InvalidConfig("laser-plane calibration required for laser reconstruction");
    PointGrid grid(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (image.at(x, y) < intensity_threshold)
                continue;
            size_t i = grid.index(x, y);
            try {
                grid.points[i] = intersect_laser_plane(
                    Vec2(static_cast<double>(x), static_cast<double>(y)), calib.camera,
                    *calib.laser_plane);
                grid.valid[i] = 1;
            } catch (const Error &) {
            }
        }
    }
    return grid;
}

} // namespace slmetro
