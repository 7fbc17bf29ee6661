#pragma once

#include <Eigen/Core>

#include "slmetro/errors.hpp"

namespace slmetro {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole intrinsics, all in pixels.
struct Intrinsics {
    double fu = 1.0;
    double fv = 1.0;
    double u0 = 0.0;
    double v0 = 0.0;
    double skew = 0.0;
};

// Radial (k1..k3) and tangential (p1, p2) distortion coefficients.
// All-zero is the identity distortion.
struct Distortion {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;

    bool is_zero() const { return k1 == 0 && k2 == 0 && k3 == 0 && p1 == 0 && p2 == 0; }
};

// Rigid transform p' = R p + T. Construction validates R^T R = I and
// det(R) = +1 to 1e-9; translation is in millimetres.
class Pose {
  public:
    Pose() : r_(Mat3::Identity()), t_(Vec3::Zero()) {}
    Pose(const Mat3 &r, const Vec3 &t);

    const Mat3 &rotation() const { return r_; }
    const Vec3 &translation() const { return t_; }

    Vec3 apply(const Vec3 &p) const { return r_ * p + t_; }
    Pose inverse() const { return Pose(r_.transpose(), -(r_.transpose() * t_)); }
    Pose compose(const Pose &inner) const { return Pose(r_ * inner.r_, r_ * inner.t_ + t_); }

  private:
    Mat3 r_;
    Vec3 t_;
};

struct CameraModel {
    Intrinsics intrinsics;
    Distortion distortion;
    int width = 0;
    int height = 0;
};

// Plane a x + b y + c z + d = 0 in the camera frame; (a,b,c) unit length,
// d in millimetres.
struct LaserPlane {
    double a = 0.0;
    double b = 0.0;
    double c = 1.0;
    double d = 0.0;

    LaserPlane() = default;
    LaserPlane(double a_, double b_, double c_, double d_);
};

// Distorted normalized point for an ideal normalized point p.
Vec2 apply_distortion(const Vec2 &p, const Distortion &d);

// Numerical inverse of apply_distortion by fixed-point iteration.
// Throws NonConvergence if the residual stays above tol.
Vec2 remove_distortion(const Vec2 &q, const Distortion &d, double tol = 1e-12,
                       int max_iter = 50);

// Projects a world point through pose (world -> camera), distortion and
// intrinsics. Throws BehindCamera when the camera-frame depth is <= 0.
Vec2 project(const Vec3 &m_world, const CameraModel &cam, const Pose &world_to_cam = Pose());

// Pixel -> undistorted normalized point on the z=1 plane.
Vec2 pixel_to_normalized(const Vec2 &pixel, const CameraModel &cam);

// Back-projects a pixel onto the laser plane. The returned point lies on
// the plane and reprojects to the pixel.
Vec3 intersect_laser_plane(const Vec2 &pixel, const CameraModel &cam, const LaserPlane &lp);

// Two-ray depth recovery from normalized points in camera and projector
// frames; pose maps camera coordinates into projector coordinates.
// Returns the point on the camera ray at the least-squares depth.
Vec3 triangulate(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj);

// Essential-matrix residual m_p^T [T]x R m_c on homogeneous normalized
// points; zero for exact correspondences.
double epipolar_residual(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj);

} // namespace slmetro
