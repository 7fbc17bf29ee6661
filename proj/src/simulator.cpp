#include "slmetro/simulator.hpp"

#include <cmath>
#include <limits>

#include "slmetro/parallel.hpp"
#include "slmetro/rng.hpp"

namespace slmetro {

namespace {

constexpr double kRayEps = 1e-9;

// RNG stream ids; counters are per-pixel so draws are order-independent.
constexpr uint64_t kStreamDepth = 1;
constexpr uint64_t kStreamOutlier = 2;
constexpr uint64_t kStreamIntensity = 3;

Mat3 rodrigues(const Vec3 &w) {
    double angle = w.norm();
    if (angle < 1e-14)
        return Mat3::Identity();
    Vec3 axis = w / angle;
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    bool on_flat = false;
};

// All intersections are done in the artifact frame; the base flat is the
// z = 0 rectangle and every solid rests on it.

void hit_flat(const Scene &scene, const Vec3 &o, const Vec3 &d, Hit &best) {
    if (std::abs(d.z()) < kRayEps)
        return;
    double t = -o.z() / d.z();
    if (t <= kRayEps || t >= best.t)
        return;
    Vec3 p = o + t * d;
    if (std::abs(p.x()) <= scene.artifact.flat_half_x &&
        std::abs(p.y()) <= scene.artifact.flat_half_y) {
        best.t = t;
        best.on_flat = true;
    }
}

void hit_box(const Vec2 &center, double sx, double sy, double h, const Vec3 &o, const Vec3 &d,
             Hit &best) {
    double lo[3] = {center.x() - sx / 2, center.y() - sy / 2, 0.0};
    double hi[3] = {center.x() + sx / 2, center.y() + sy / 2, h};
    double tmin = kRayEps, tmax = best.t;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < kRayEps) {
            if (o[i] < lo[i] || o[i] > hi[i])
                return;
            continue;
        }
        double t0 = (lo[i] - o[i]) / d[i];
        double t1 = (hi[i] - o[i]) / d[i];
        if (t0 > t1)
            std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax)
            return;
    }
    if (tmin > kRayEps && tmin < best.t) {
        best.t = tmin;
        best.on_flat = false;
    }
}

void hit_sphere(const Vec3 &center, double r, const Vec3 &o, const Vec3 &d, Hit &best) {
    Vec3 oc = o - center;
    double a = d.squaredNorm();
    double b = 2.0 * oc.dot(d);
    double c = oc.squaredNorm() - r * r;
    double disc = b * b - 4 * a * c;
    if (disc < 0)
        return;
    double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t > kRayEps && t < best.t) {
            best.t = t;
            best.on_flat = false;
            return;
        }
    }
}

void hit_pin(const Vec2 &center, double r, double h, const Vec3 &o, const Vec3 &d, Hit &best) {
    // Top disk.
    if (std::abs(d.z()) > kRayEps) {
        double t = (h - o.z()) / d.z();
        if (t > kRayEps && t < best.t) {
            Vec3 p = o + t * d;
            if ((Vec2(p.x(), p.y()) - center).squaredNorm() <= r * r) {
                best.t = t;
                best.on_flat = false;
            }
        }
    }
    // Side wall.
    double ox = o.x() - center.x(), oy = o.y() - center.y();
    double a = d.x() * d.x() + d.y() * d.y();
    if (a < kRayEps)
        return;
    double b = 2.0 * (ox * d.x() + oy * d.y());
    double c = ox * ox + oy * oy - r * r;
    double disc = b * b - 4 * a * c;
    if (disc < 0)
        return;
    double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t > kRayEps && t < best.t) {
            double z = o.z() + t * d.z();
            if (z >= 0.0 && z <= h) {
                best.t = t;
                best.on_flat = false;
                return;
            }
        }
    }
}

Hit intersect_scene(const Scene &scene, const Vec3 &o, const Vec3 &d, bool solids_only) {
    Hit best;
    if (!solids_only)
        hit_flat(scene, o, d, best);
    switch (scene.kind) {
    case SceneKind::Flat:
        break;
    case SceneKind::Block:
        hit_box(scene.block_center, scene.artifact.block_size_x, scene.artifact.block_size_y,
                scene.artifact.block_height, o, d, best);
        break;
    case SceneKind::Balls:
        for (const Vec3 &c : scene.ball_centers)
            hit_sphere(c, scene.artifact.ball_radius, o, d, best);
        break;
    case SceneKind::Pins:
        for (size_t i = 0; i < scene.pin_centers.size(); ++i)
            hit_pin(scene.pin_centers[i], scene.artifact.pin_radius,
                    scene.artifact.pin_height + scene.pin_tip_offsets[i], o, d, best);
        break;
    }
    return best;
}

double ink_coverage(const Scene &scene, const Vec3 &p_art) {
    if (scene.kind != SceneKind::Flat || scene.marker_centers.empty())
        return 0.0;
    double best = 0.0;
    Vec2 xy(p_art.x(), p_art.y());
    double hw = scene.artifact.marker_ink_halfwidth;
    double feather = std::max(scene.ink_feather, 1e-6);
    for (const Vec2 &m : scene.marker_centers) {
        double d = (xy - m).norm();
        double cov = std::clamp((hw + feather / 2 - std::abs(d - scene.artifact.marker_radius)) /
                                    feather,
                                0.0, 1.0);
        best = std::max(best, cov);
    }
    return best;
}

} // namespace

Scene build_scene(const ArtifactSpec &spec, const WorkingRange &range, double depth_offset,
                  const PoseJitter &jitter, SceneKind kind, uint64_t seed, double pin_spread) {
    validate_artifact(spec);
    if (std::abs(depth_offset) > range.half_range)
        throw OutOfWorkingRange("depth offset " + std::to_string(depth_offset) +
                                " mm exceeds working half-range " +
                                std::to_string(range.half_range) + " mm");

    Scene scene;
    scene.kind = kind;
    scene.artifact = spec;
    scene.range = range;

    // Artifact frame: x right, y up, z out of the flat toward the camera.
    Mat3 base;
    base << 1, 0, 0, 0, -1, 0, 0, 0, -1;

    double max_rot = jitter.max_rot_deg * M_PI / 180.0;
    double ang = max_rot * uniform(seed, 10, 0);
    Vec3 axis(gaussian(seed, 11, 0), gaussian(seed, 11, 1), gaussian(seed, 11, 2));
    if (axis.norm() < 1e-12)
        axis = Vec3::UnitZ();
    Mat3 rj = rodrigues(axis.normalized() * ang);
    double dx = jitter.max_shift * (2.0 * uniform(seed, 12, 0) - 1.0);
    double dy = jitter.max_shift * (2.0 * uniform(seed, 12, 1) - 1.0);
    scene.artifact_to_camera =
        Pose(rj * base, Vec3(dx, dy, range.reference_depth + depth_offset));

    switch (kind) {
    case SceneKind::Flat:
        for (int r = 0; r < spec.marker_rows; ++r)
            for (int c = 0; c < spec.marker_cols; ++c)
                scene.marker_centers.emplace_back(
                    (c - (spec.marker_cols - 1) / 2.0) * spec.marker_pitch,
                    (r - (spec.marker_rows - 1) / 2.0) * spec.marker_pitch);
        break;
    case SceneKind::Block:
        scene.block_center = Vec2::Zero();
        break;
    case SceneKind::Balls: {
        std::vector<Vec2> layout =
            spec.ball_positions.empty() ? default_ball_layout(spec) : spec.ball_positions;
        for (const Vec2 &p : layout)
            scene.ball_centers.emplace_back(p.x(), p.y(), spec.ball_radius);
        break;
    }
    case SceneKind::Pins: {
        scene.pin_centers = default_pin_layout(spec);
        scene.pin_tip_offsets.resize(scene.pin_centers.size(), 0.0);
        // Zero-mean checkerboard spread: tip heights span exactly
        // pin_spread without tilting the fitted plane.
        int cols = (spec.pin_count + 1) / 2;
        for (size_t i = 0; i < scene.pin_tip_offsets.size(); ++i) {
            int row = static_cast<int>(i) / cols;
            int col = static_cast<int>(i) % cols;
            scene.pin_tip_offsets[i] = ((row + col) % 2 ? 0.5 : -0.5) * pin_spread;
        }
        break;
    }
    }
    return scene;
}

TraceResult trace_pixel(const Scene &scene, const Calibration &calib, const Vec2 &pixel) {
    TraceResult res;
    Vec2 n = pixel_to_normalized(pixel, calib.camera);
    Vec3 dir_cam(n.x(), n.y(), 1.0);

    const Pose &pose = scene.artifact_to_camera;
    Mat3 rt = pose.rotation().transpose();
    Vec3 o = -(rt * pose.translation());
    Vec3 d = rt * dir_cam;

    Hit hit = intersect_scene(scene, o, d, false);
    if (!std::isfinite(hit.t))
        return res;
    res.hit = true;
    Vec3 p_art = o + hit.t * d;
    res.point = pose.apply(p_art);
    res.ink = hit.on_flat ? ink_coverage(scene, p_art) : 0.0;

    if (calib.projector_mode()) {
        try {
            Vec2 pp = project(res.point, *calib.projector, *calib.cam_to_proj);
            res.proj_col = pp.x();
            res.proj_row = pp.y();
            bool inside = pp.x() >= 0 && pp.x() <= calib.projector->width - 1 && pp.y() >= 0 &&
                          pp.y() <= calib.projector->height - 1;
            bool shadowed = false;
            if (inside && scene.has_solids()) {
                Pose proj_to_cam = calib.cam_to_proj->inverse();
                Vec3 proj_center_art = rt * (proj_to_cam.translation() - pose.translation());
                Vec3 to_proj = proj_center_art - p_art;
                double dist = to_proj.norm();
                Hit occ = intersect_scene(scene, p_art + to_proj * (1e-6 / dist), to_proj, true);
                shadowed = occ.t < 1.0 - 1e-6;
            }
            res.proj_visible = inside && !shadowed;
        } catch (const BehindCamera &) {
            res.proj_visible = false;
        }
    }
    return res;
}

namespace {

std::vector<TraceResult> trace_all(const Scene &scene, const Calibration &calib) {
    int w = calib.camera.width, h = calib.camera.height;
    std::vector<TraceResult> traces(static_cast<size_t>(w) * h);
    parallel_for(static_cast<size_t>(h), [&](size_t y) {
        for (int x = 0; x < w; ++x)
            traces[y * w + x] =
                trace_pixel(scene, calib, Vec2(static_cast<double>(x), static_cast<double>(y)));
    });
    return traces;
}

double albedo_of(const Scene &scene, const TraceResult &t) {
    return scene.flat_albedo * (1.0 - t.ink) + scene.ink_albedo * t.ink;
}

} // namespace

RenderedStack render_stack(const Scene &scene, const Calibration &calib,
                           const PatternStack &patterns, const NoiseModel &noise) {
    if (!calib.projector_mode())
        throw InvalidConfig("render_stack requires projector calibration");
    if (patterns.width != calib.projector->width || patterns.height != calib.projector->height)
        throw InvalidConfig("pattern resolution disagrees with projector calibration");

    int w = calib.camera.width, h = calib.camera.height;
    size_t npix = static_cast<size_t>(w) * h;
    std::vector<TraceResult> traces = trace_all(scene, calib);

    RenderedStack out;
    out.stack.meta = patterns.meta;
    out.stack.frames.assign(patterns.frames.size(), Image8(w, h));
    out.texture = Image8(w, h);

    parallel_for(npix, [&](size_t i) {
        const TraceResult &t = traces[i];
        double albedo = t.hit ? albedo_of(scene, t) : 0.0;
        for (size_t f = 0; f < patterns.frames.size(); ++f) {
            double lit = 0.0;
            if (t.hit && t.proj_visible)
                lit = albedo * patterns.frames[f].sample(t.proj_col, t.proj_row);
            if (noise.sigma_i > 0)
                lit += noise.sigma_i * gaussian(noise.seed, kStreamIntensity, f * npix + i);
            out.stack.frames[f].pixels[i] = quantize8(lit);
        }
        double tex = albedo * 255.0;
        if (noise.sigma_i > 0)
            tex += noise.sigma_i *
                   gaussian(noise.seed, kStreamIntensity, patterns.frames.size() * npix + i);
        out.texture.pixels[i] = quantize8(tex);
    });
    return out;
}

Image8 render_texture(const Scene &scene, const Calibration &calib, const NoiseModel &noise) {
    int w = calib.camera.width, h = calib.camera.height;
    size_t npix = static_cast<size_t>(w) * h;
    std::vector<TraceResult> traces = trace_all(scene, calib);
    Image8 tex(w, h);
    parallel_for(npix, [&](size_t i) {
        double v = traces[i].hit ? albedo_of(scene, traces[i]) * 255.0 : 0.0;
        if (noise.sigma_i > 0)
            v += noise.sigma_i * gaussian(noise.seed, kStreamIntensity, i);
        tex.pixels[i] = quantize8(v);
    });
    return tex;
}

PointGrid synthesize_grid(const Scene &scene, const Calibration &calib,
                          const NoiseModel &noise) {
    int w = calib.camera.width, h = calib.camera.height;
    PointGrid grid(w, h);
    parallel_for(static_cast<size_t>(h), [&](size_t y) {
        for (int x = 0; x < w; ++x) {
            size_t i = y * static_cast<size_t>(w) + x;
            TraceResult t =
                trace_pixel(scene, calib, Vec2(static_cast<double>(x), static_cast<double>(y)));
            if (!t.hit)
                continue;
            Vec3 p = t.point;
            Vec3 ray = p.normalized();
            if (noise.outlier_rate > 0 &&
                uniform(noise.seed, kStreamOutlier, 2 * i) < noise.outlier_rate) {
                double z = scene.range.reference_depth +
                           scene.range.half_range *
                               (2.0 * uniform(noise.seed, kStreamOutlier, 2 * i + 1) - 1.0);
                p = Vec3(p.x() / p.z(), p.y() / p.z(), 1.0) * z;
            } else if (noise.sigma_z > 0) {
                p += ray * (noise.sigma_z * gaussian(noise.seed, kStreamDepth, i));
            }
            grid.points[i] = p;
            grid.valid[i] = 1;
        }
    });
    return grid;
}

PointGrid smooth_grid(const PointGrid &grid, int kernel_size) {
    if (kernel_size < 3 || kernel_size % 2 == 0)
        throw InvalidKernel("kernel_size must be odd and >= 3, got " +
                            std::to_string(kernel_size));
    int half = kernel_size / 2;
    PointGrid out = grid;
    parallel_for(static_cast<size_t>(grid.height), [&](size_t y) {
        for (int x = 0; x < grid.width; ++x) {
            size_t i = y * static_cast<size_t>(grid.width) + x;
            if (!grid.valid[i])
                continue;
            Vec3 acc = Vec3::Zero();
            int n = 0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) {
                    int nx = x + dx, ny = static_cast<int>(y) + dy;
                    if (nx < 0 || nx >= grid.width || ny < 0 || ny >= grid.height)
                        continue;
                    size_t ni = static_cast<size_t>(ny) * grid.width + nx;
                    if (!grid.valid[ni])
                        continue;
                    acc += grid.points[ni];
                    ++n;
                }
            }
            out.points[i] = acc / n;
        }
    });
    return out;
}

std::vector<Vec3> pin_tip_points(const Scene &scene) {
    std::vector<Vec3> tips;
    tips.reserve(scene.pin_centers.size());
    for (size_t i = 0; i < scene.pin_centers.size(); ++i) {
        Vec3 p_art(scene.pin_centers[i].x(), scene.pin_centers[i].y(),
                   scene.artifact.pin_height + scene.pin_tip_offsets[i]);
        tips.push_back(scene.artifact_to_camera.apply(p_art));
    }
    return tips;
}

} // namespace slmetro
