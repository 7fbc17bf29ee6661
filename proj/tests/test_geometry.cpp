#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "slmetro/geometry.hpp"
#include "slmetro/rng.hpp"

using namespace slmetro;

namespace {

Mat3 rotation_xyz(double ax, double ay, double az) {
    return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
            Eigen::AngleAxisd(ax, Vec3::UnitX()))
        .toRotationMatrix();
}

Distortion random_mild_distortion(uint64_t seed, uint64_t i) {
    Distortion d;
    d.k1 = 0.3 * (2.0 * uniform(seed, 1, i * 8 + 0) - 1.0);
    d.k2 = 0.3 * (2.0 * uniform(seed, 1, i * 8 + 1) - 1.0);
    d.k3 = 0.3 * (2.0 * uniform(seed, 1, i * 8 + 2) - 1.0);
    d.p1 = 0.01 * (2.0 * uniform(seed, 1, i * 8 + 3) - 1.0);
    d.p2 = 0.01 * (2.0 * uniform(seed, 1, i * 8 + 4) - 1.0);
    return d;
}

// Independent two-ray midpoint oracle: least-squares closest point of the
// camera ray (origin, direction mc) and the projector ray expressed in the
// camera frame. Solves the 2x2 normal equations directly.
Vec3 midpoint_triangulate(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj) {
    Vec3 d1(m_cam.x(), m_cam.y(), 1.0);
    Mat3 rt = cam_to_proj.rotation().transpose();
    Vec3 o2 = -(rt * cam_to_proj.translation());
    Vec3 d2 = rt * Vec3(m_proj.x(), m_proj.y(), 1.0);
    double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2);
    Vec3 w = o2; // o2 - o1 with o1 = 0
    double p = d1.dot(w), q = d2.dot(w);
    double det = a * c - b * b;
    REQUIRE(std::abs(det) > 1e-15);
    double s = (p * c - b * q) / det;
    double t = (b * p - a * q) / det;
    return 0.5 * (s * d1 + (o2 + t * d2));
}

} // namespace

TEST_CASE("apply_distortion identity and fixed points") {
    Distortion zero;
    Vec2 p(0.1, 0.2);
    CHECK((apply_distortion(p, zero) - p).norm() == 0.0);

    Distortion d{0.2, -0.1, 0.05, 0.001, -0.002};
    CHECK(apply_distortion(Vec2(0.0, 0.0), d).norm() == 0.0);
}

TEST_CASE("apply_distortion hand-evaluated radial term") {
    Distortion d;
    d.k1 = 0.1;
    Vec2 out = apply_distortion(Vec2(0.1, 0.0), d);
    CHECK(out.x() == doctest::Approx(0.1001).epsilon(1e-12));
    CHECK(out.y() == 0.0);
}

TEST_CASE("remove_distortion inverts apply_distortion") {
    Distortion zero;
    CHECK((remove_distortion(Vec2(0.1, 0.2), zero) - Vec2(0.1, 0.2)).norm() == 0.0);
    CHECK(remove_distortion(Vec2(0.0, 0.0), zero).norm() == 0.0);

    for (uint64_t i = 0; i < 200; ++i) {
        Distortion d = random_mild_distortion(42, i);
        double r = 0.5 * uniform(42, 2, i * 2);
        double th = 2.0 * M_PI * uniform(42, 2, i * 2 + 1);
        Vec2 p(r * std::cos(th), r * std::sin(th));
        Vec2 q = apply_distortion(p, d);
        Vec2 back = remove_distortion(q, d);
        CHECK((back - p).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("remove_distortion reports non-convergence on pathological coefficients") {
    Distortion d;
    d.k1 = -80.0; // collapses the radial scale; the fixed point diverges
    CHECK_THROWS_AS(remove_distortion(Vec2(0.4, 0.3), d), NonConvergence);
}

TEST_CASE("project maps the optical axis to the principal point") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    cam.width = 1280;
    cam.height = 960;
    Vec2 px = project(Vec3(0.0, 0.0, 100.0), cam);
    CHECK(px.x() == doctest::Approx(640.0).epsilon(1e-14));
    CHECK(px.y() == doctest::Approx(480.0).epsilon(1e-14));
}

TEST_CASE("project hand-evaluated off-axis point") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    cam.width = 1280;
    cam.height = 960;
    Vec2 px = project(Vec3(10.0, 0.0, 100.0), cam);
    CHECK(px.x() == doctest::Approx(740.0).epsilon(1e-14));
    CHECK(px.y() == doctest::Approx(480.0).epsilon(1e-14));
}

TEST_CASE("project rejects points behind the camera") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    CHECK_THROWS_AS(project(Vec3(0.0, 0.0, -1.0), cam), BehindCamera);
    CHECK_THROWS_AS(project(Vec3(1.0, 2.0, 0.0), cam), BehindCamera);
}

TEST_CASE("pixel_to_normalized inverts project") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    CHECK(pixel_to_normalized(Vec2(640.0, 480.0), cam).norm() == 0.0);

    Vec2 n = pixel_to_normalized(Vec2(740.0, 480.0), cam);
    CHECK(n.x() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(n.y() == 0.0);

    // Round trip with skew and distortion enabled.
    CameraModel hard;
    hard.intrinsics = {1450.0, 1410.0, 601.5, 412.25, 0.7};
    hard.distortion = {-0.12, 0.03, -0.004, 3e-4, -2e-4};
    for (uint64_t i = 0; i < 1000; ++i) {
        Vec3 m(40.0 * (2.0 * uniform(7, 3, i * 3) - 1.0),
               30.0 * (2.0 * uniform(7, 3, i * 3 + 1) - 1.0),
               80.0 + 60.0 * uniform(7, 3, i * 3 + 2));
        Vec2 px = project(m, hard);
        Vec2 n2 = pixel_to_normalized(px, hard);
        Vec2 re = project(Vec3(n2.x() * m.z(), n2.y() * m.z(), m.z()), hard);
        CHECK((re - px).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("pose construction validates the rotation") {
    Mat3 r = rotation_xyz(0.3, -0.2, 0.9);
    Pose pose(r, Vec3(1.0, 2.0, 3.0));
    CHECK((pose.rotation().transpose() * pose.rotation() - Mat3::Identity()).norm() < 1e-9);

    Mat3 scaled = 1.01 * r;
    CHECK_THROWS_AS(Pose(scaled, Vec3::Zero()), InvalidPose);
    Mat3 reflected = r;
    reflected.col(0) *= -1.0; // det = -1
    CHECK_THROWS_AS(Pose(reflected, Vec3::Zero()), InvalidPose);
}

TEST_CASE("pose inverse and compose round trip") {
    Pose pose(rotation_xyz(0.1, 0.4, -0.6), Vec3(5.0, -2.0, 9.0));
    Vec3 p(1.0, 2.0, 3.0);
    CHECK((pose.inverse().apply(pose.apply(p)) - p).norm() < 1e-12);
    CHECK((pose.compose(pose.inverse()).apply(p) - p).norm() < 1e-12);
}

TEST_CASE("laser plane normalizes its coefficients and rejects zero normals") {
    LaserPlane lp(0.0, 0.0, 2.0, -200.0);
    CHECK(lp.c == doctest::Approx(1.0));
    CHECK(lp.d == doctest::Approx(-100.0));
    CHECK_THROWS_AS(LaserPlane(0.0, 0.0, 0.0, 1.0), InvalidConfig);
}

TEST_CASE("intersect_laser_plane axis ray hits the frontal plane") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    Vec3 hit = intersect_laser_plane(Vec2(640.0, 480.0), cam, LaserPlane(0, 0, 1, -100.0));
    CHECK((hit - Vec3(0.0, 0.0, 100.0)).norm() < 1e-12);
}

TEST_CASE("intersect_laser_plane recovers synthesized on-plane points") {
    CameraModel cam;
    cam.intrinsics = {1200.0, 1180.0, 320.0, 256.0, 0.0};
    cam.distortion = {-0.08, 0.02, 0.0, 1e-4, -3e-4};
    for (uint64_t i = 0; i < 500; ++i) {
        Vec3 n(0.3 * (2.0 * uniform(9, 4, i * 6) - 1.0), 0.3 * (2.0 * uniform(9, 4, i * 6 + 1) - 1.0),
               1.0);
        n.normalize();
        double depth = 150.0 + 100.0 * uniform(9, 4, i * 6 + 2);
        Vec3 m(20.0 * (2.0 * uniform(9, 4, i * 6 + 3) - 1.0),
               15.0 * (2.0 * uniform(9, 4, i * 6 + 4) - 1.0), depth);
        LaserPlane lp(n.x(), n.y(), n.z(), -n.dot(m));
        Vec2 px = project(m, cam);
        Vec3 hit = intersect_laser_plane(px, cam, lp);
        CHECK(std::abs(lp.a * hit.x() + lp.b * hit.y() + lp.c * hit.z() + lp.d) < 1e-9);
        CHECK((hit - m).norm() < 1e-9);
        CHECK((project(hit, cam) - px).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("intersect_laser_plane rejects parallel rays") {
    CameraModel cam;
    cam.intrinsics = {1000.0, 1000.0, 640.0, 480.0, 0.0};
    CHECK_THROWS_AS(intersect_laser_plane(Vec2(640.0, 480.0), cam, LaserPlane(1, 0, 0, -5.0)),
                    RayParallelToPlane);
}

TEST_CASE("triangulate recovers synthesized correspondences") {
    Pose cam_to_proj(rotation_xyz(0.02, -0.3, 0.01), Vec3(-95.0, 2.0, 30.0));
    for (uint64_t i = 0; i < 1000; ++i) {
        Vec3 m(60.0 * (2.0 * uniform(11, 5, i * 3) - 1.0),
               45.0 * (2.0 * uniform(11, 5, i * 3 + 1) - 1.0),
               250.0 + 200.0 * uniform(11, 5, i * 3 + 2));
        Vec2 mc(m.x() / m.z(), m.y() / m.z());
        Vec3 mp3 = cam_to_proj.apply(m);
        Vec2 mp(mp3.x() / mp3.z(), mp3.y() / mp3.z());
        Vec3 rec = triangulate(mc, mp, cam_to_proj);
        CHECK((rec - m).norm() < 1e-9 * m.norm());
        CHECK(std::abs(epipolar_residual(mc, mp, cam_to_proj)) < 1e-12);
    }
}

TEST_CASE("triangulate agrees with the midpoint least-squares oracle") {
    for (uint64_t i = 0; i < 1000; ++i) {
        Pose pose(rotation_xyz(0.4 * (uniform(13, 6, i * 9) - 0.5),
                               0.6 * (uniform(13, 6, i * 9 + 1) - 0.5),
                               0.4 * (uniform(13, 6, i * 9 + 2) - 0.5)),
                  Vec3(-150.0 + 40.0 * uniform(13, 6, i * 9 + 3),
                       20.0 * (uniform(13, 6, i * 9 + 4) - 0.5),
                       60.0 * (uniform(13, 6, i * 9 + 5) - 0.5)));
        Vec3 m(50.0 * (2.0 * uniform(13, 6, i * 9 + 6) - 1.0),
               40.0 * (2.0 * uniform(13, 6, i * 9 + 7) - 1.0),
               200.0 + 250.0 * uniform(13, 6, i * 9 + 8));
        Vec2 mc(m.x() / m.z(), m.y() / m.z());
        Vec3 mp3 = pose.apply(m);
        if (mp3.z() < 10.0)
            continue;
        Vec2 mp(mp3.x() / mp3.z(), mp3.y() / mp3.z());
        Vec3 closed = triangulate(mc, mp, pose);
        Vec3 oracle = midpoint_triangulate(mc, mp, pose);
        CHECK(std::abs(closed.z() - oracle.z()) < 1e-9 * std::abs(oracle.z()));
    }
}

TEST_CASE("triangulate rejects parallel rays") {
    Pose identity;
    CHECK_THROWS_AS(triangulate(Vec2(0.1, 0.2), Vec2(0.1, 0.2), identity), DegenerateRays);
}

TEST_CASE("epipolar residual flags off-line points and vanishes without baseline") {
    Pose pose(rotation_xyz(0.05, -0.2, 0.0), Vec3(-100.0, 0.0, 10.0));
    Vec3 m(12.0, -7.0, 300.0);
    Vec2 mc(m.x() / m.z(), m.y() / m.z());
    Vec3 mp3 = pose.apply(m);
    Vec2 mp(mp3.x() / mp3.z(), mp3.y() / mp3.z());
    CHECK(std::abs(epipolar_residual(mc, mp, pose)) < 1e-12);
    CHECK(std::abs(epipolar_residual(mc, mp + Vec2(0.0, 0.01), pose)) > 1e-6);

    Pose no_baseline(rotation_xyz(0.1, 0.2, 0.3), Vec3::Zero());
    CHECK(epipolar_residual(Vec2(0.4, -0.2), Vec2(0.3, 0.6), no_baseline) == 0.0);
}
