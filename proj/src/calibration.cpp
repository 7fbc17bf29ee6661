#include "slmetro/calibration.hpp"

#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace slmetro {

namespace {

using nlohmann::json;

json camera_to_json(const CameraModel &cam) {
    return json{
        {"resolution", {cam.width, cam.height}},
        {"intrinsics",
         {{"fu", cam.intrinsics.fu},
          {"fv", cam.intrinsics.fv},
          {"u0", cam.intrinsics.u0},
          {"v0", cam.intrinsics.v0},
          {"skew", cam.intrinsics.skew}}},
        {"distortion",
         {{"k1", cam.distortion.k1},
          {"k2", cam.distortion.k2},
          {"k3", cam.distortion.k3},
          {"p1", cam.distortion.p1},
          {"p2", cam.distortion.p2}}},
    };
}

CameraModel camera_from_json(const json &j) {
    CameraModel cam;
    cam.width = j.at("resolution").at(0).get<int>();
    cam.height = j.at("resolution").at(1).get<int>();
    if (cam.width <= 0 || cam.height <= 0)
        throw InvalidConfig("calibration: resolution must be positive");
    const json &k = j.at("intrinsics");
    cam.intrinsics.fu = k.at("fu").get<double>();
    cam.intrinsics.fv = k.at("fv").get<double>();
    cam.intrinsics.u0 = k.at("u0").get<double>();
    cam.intrinsics.v0 = k.at("v0").get<double>();
    cam.intrinsics.skew = k.value("skew", 0.0);
    if (cam.intrinsics.fu <= 0 || cam.intrinsics.fv <= 0)
        throw InvalidConfig("calibration: focal lengths must be positive");
    if (j.contains("distortion")) {
        const json &d = j.at("distortion");
        cam.distortion.k1 = d.value("k1", 0.0);
        cam.distortion.k2 = d.value("k2", 0.0);
        cam.distortion.k3 = d.value("k3", 0.0);
        cam.distortion.p1 = d.value("p1", 0.0);
        cam.distortion.p2 = d.value("p2", 0.0);
    }
    return cam;
}

} // namespace

Calibration load_calibration(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open calibration file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw IoError("calibration parse error in " + path + ": " + e.what());
    }
    Calibration calib;
    calib.camera = camera_from_json(j.at("camera"));
    if (j.contains("projector"))
        calib.projector = camera_from_json(j.at("projector"));
    if (j.contains("cam_to_proj")) {
        const json &p = j.at("cam_to_proj");
        const json &r = p.at("rotation"); // row-major, 9 elements
        if (r.size() != 9)
            throw InvalidConfig("calibration: rotation must have 9 elements");
        Mat3 rot;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                rot(i, k) = r.at(i * 3 + k).get<double>();
        const json &t = p.at("translation");
        if (t.size() != 3)
            throw InvalidConfig("calibration: translation must have 3 elements");
        calib.cam_to_proj = Pose(rot, Vec3(t.at(0).get<double>(), t.at(1).get<double>(),
                                           t.at(2).get<double>()));
    }
    if (j.contains("laser_plane")) {
        const json &lp = j.at("laser_plane");
        if (lp.size() != 4)
            throw InvalidConfig("calibration: laser_plane must have 4 elements");
        calib.laser_plane = LaserPlane(lp.at(0).get<double>(), lp.at(1).get<double>(),
                                       lp.at(2).get<double>(), lp.at(3).get<double>());
    }
    return calib;
}

void save_calibration(const Calibration &calib, const std::string &path) {
    json j;
    j["camera"] = camera_to_json(calib.camera);
    if (calib.projector)
        j["projector"] = camera_to_json(*calib.projector);
    if (calib.cam_to_proj) {
        json r = json::array();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                r.push_back(calib.cam_to_proj->rotation()(i, k));
        j["cam_to_proj"] = {
            {"rotation", r},
            {"translation",
             {calib.cam_to_proj->translation().x(), calib.cam_to_proj->translation().y(),
              calib.cam_to_proj->translation().z()}},
        };
    }
    if (calib.laser_plane)
        j["laser_plane"] = {calib.laser_plane->a, calib.laser_plane->b, calib.laser_plane->c,
                            calib.laser_plane->d};
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write calibration file: " + path);
    out << j.dump(2) << "\n";
}

Calibration default_calibration(DeviceScale scale) {
    Calibration calib;
    if (scale == DeviceScale::Full) {
        calib.camera.width = 2448;
        calib.camera.height = 2048;
        calib.camera.intrinsics = {4800.0, 4800.0, 1224.0, 1024.0, 0.0};
    } else {
        calib.camera.width = 612;
        calib.camera.height = 512;
        calib.camera.intrinsics = {1200.0, 1200.0, 306.0, 256.0, 0.0};
    }
    calib.camera.distortion = {-0.05, 0.01, 0.0, 2e-4, -1e-4};

    CameraModel proj;
    proj.width = 1280;
    proj.height = 720;
    // Long-throw projector lens and a wide baseline: depth resolution per
    // decoded projector column is Z^2/(f_p * B) ~ 0.19 mm, so sub-pixel
    // decoding reaches micrometre depth precision.
    proj.intrinsics = {2800.0, 2800.0, 640.0, 360.0, 0.0};
    proj.distortion = {-0.03, 0.0, 0.0, 1e-4, 0.0};
    calib.projector = proj;

    // Projector 300 mm to the right of the camera, toed in toward the
    // middle of the working volume.
    Vec3 proj_center(300.0, 0.0, 0.0);
    Vec3 target(0.0, 0.0, 400.0);
    Vec3 z = (target - proj_center).normalized();
    Vec3 x = Vec3(0.0, 1.0, 0.0).cross(z).normalized();
    Vec3 y = z.cross(x);
    Mat3 rot;
    rot.row(0) = x;
    rot.row(1) = y;
    rot.row(2) = z;
    calib.cam_to_proj = Pose(rot, -(rot * proj_center));
    return calib;
}

} // namespace slmetro
