#pragma once

#include <optional>
#include <string>

#include "slmetro/geometry.hpp"

namespace slmetro {

enum class DeviceScale { Full, Quarter };

// All calibration parameters are consumed as input; estimating them is
// out of scope for this toolkit.
struct Calibration {
    CameraModel camera;
    std::optional<CameraModel> projector;
    std::optional<Pose> cam_to_proj; // camera frame -> projector frame
    std::optional<LaserPlane> laser_plane;

    bool projector_mode() const { return projector.has_value() && cam_to_proj.has_value(); }
    bool laser_mode() const { return laser_plane.has_value() && !projector_mode(); }
};

Calibration load_calibration(const std::string &path);
void save_calibration(const Calibration &calib, const std::string &path);

// Virtual device mirroring the benchmark hardware scale: 2448x2048
// camera at full scale, 612x512 at quarter scale; 1280x720 projector.
Calibration default_calibration(DeviceScale scale = DeviceScale::Quarter);

} // namespace slmetro
