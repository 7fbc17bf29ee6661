#pragma once

#include "slmetro/calibration.hpp"
#include "slmetro/fitting.hpp"
#include "slmetro/image.hpp"
#include "slmetro/pattern_codec.hpp"

namespace slmetro {

// Completes a column-only projector correspondence to a full normalized
// projector point using the epipolar constraint, solving the projector
// distortion by fixed-point iteration. m_cam is the undistorted
// normalized camera point.
Vec2 projector_point_from_column(const Vec2 &m_cam, double proj_col, const Calibration &calib);

// Triangulates every valid decoded pixel. Pixels whose completion or
// triangulation degenerates are marked invalid, not fatal.
PointGrid reconstruct_grid(const CorrespondenceMap &map, const Calibration &calib,
                           int workers = 0);

// Laser-line profilometry: every pixel at or above the intensity
// threshold is intersected with the calibrated laser plane.
PointGrid reconstruct_laser(const Image8 &image, const Calibration &calib,
                            double intensity_threshold = 128.0);

} // namespace slmetro
