#include "slmetro/geometry.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace slmetro {

namespace {
constexpr double kPoseTol = 1e-9;
constexpr double kDegenerateTol = 1e-12;
} // namespace

Pose::Pose(const Mat3 &r, const Vec3 &t) : r_(r), t_(t) {
    double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    double det = r.determinant();
    if (ortho > kPoseTol || std::abs(det - 1.0) > kPoseTol)
        throw InvalidPose("rotation matrix is not a proper rotation (orthogonality " +
                          std::to_string(ortho) + ", det " + std::to_string(det) + ")");
}

LaserPlane::LaserPlane(double a_, double b_, double c_, double d_) {
    double n = std::sqrt(a_ * a_ + b_ * b_ + c_ * c_);
    if (n < kDegenerateTol)
        throw InvalidConfig("laser plane has zero normal");
    a = a_ / n;
    b = b_ / n;
    c = c_ / n;
    d = d_ / n;
}

Vec2 apply_distortion(const Vec2 &p, const Distortion &d) {
    double x = p.x(), y = p.y();
    double r2 = x * x + y * y;
    double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    double dx = 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x);
    double dy = 2.0 * d.p2 * x * y + d.p1 * (r2 + 2.0 * y * y);
    return {x * radial + dx, y * radial + dy};
}

Vec2 remove_distortion(const Vec2 &q, const Distortion &d, double tol, int max_iter) {
    if (d.is_zero())
        return q;
    Vec2 p = q;
    for (int i = 0; i < max_iter; ++i) {
        double r2 = p.squaredNorm();
        double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
        double dx = 2.0 * d.p1 * p.x() * p.y() + d.p2 * (r2 + 2.0 * p.x() * p.x());
        double dy = 2.0 * d.p2 * p.x() * p.y() + d.p1 * (r2 + 2.0 * p.y() * p.y());
        p = Vec2(q.x() - dx, q.y() - dy) / radial;
        if ((apply_distortion(p, d) - q).cwiseAbs().maxCoeff() <= tol)
            return p;
    }
    throw NonConvergence("undistortion did not converge; pathological coefficients?");
}

Vec2 project(const Vec3 &m_world, const CameraModel &cam, const Pose &world_to_cam) {
    Vec3 m = world_to_cam.apply(m_world);
    if (m.z() <= 0.0)
        throw BehindCamera("point has depth " + std::to_string(m.z()));
    Vec2 hat = apply_distortion(Vec2(m.x() / m.z(), m.y() / m.z()), cam.distortion);
    const Intrinsics &k = cam.intrinsics;
    return {k.fu * hat.x() + k.skew * hat.y() + k.u0, k.fv * hat.y() + k.v0};
}

Vec2 pixel_to_normalized(const Vec2 &pixel, const CameraModel &cam) {
    const Intrinsics &k = cam.intrinsics;
    double y = (pixel.y() - k.v0) / k.fv;
    double x = (pixel.x() - k.u0 - k.skew * y) / k.fu;
    return remove_distortion(Vec2(x, y), cam.distortion);
}

Vec3 intersect_laser_plane(const Vec2 &pixel, const CameraModel &cam, const LaserPlane &lp) {
    Vec2 n = pixel_to_normalized(pixel, cam);
    double denom = lp.a * n.x() + lp.b * n.y() + lp.c;
    if (std::abs(denom) < kDegenerateTol)
        throw RayParallelToPlane("viewing ray parallel to laser plane");
    double z = -lp.d / denom;
    return {n.x() * z, n.y() * z, z};
}

Vec3 triangulate(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj) {
    Vec3 mc(m_cam.x(), m_cam.y(), 1.0);
    Vec3 mp(m_proj.x(), m_proj.y(), 1.0);
    Vec3 a = cam_to_proj.rotation() * mc;
    const Vec3 &t = cam_to_proj.translation();
    double ab = a.dot(mp);
    double denom = a.squaredNorm() * mp.squaredNorm() - ab * ab;
    if (denom < kDegenerateTol)
        throw DegenerateRays("camera and projector rays are parallel");
    double z = (ab * mp.dot(t) - mp.squaredNorm() * a.dot(t)) / denom;
    return mc * z;
}

double epipolar_residual(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj) {
    Vec3 mc(m_cam.x(), m_cam.y(), 1.0);
    Vec3 mp(m_proj.x(), m_proj.y(), 1.0);
    return mp.dot(cam_to_proj.translation().cross(cam_to_proj.rotation() * mc));
}

} // namespace slmetro
