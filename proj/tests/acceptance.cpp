// Acceptance harness: one pass/fail line per criterion, exit 0 only when
// every criterion passes. Each check pins its tolerances explicitly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slmetro/bench.hpp"
#include "slmetro/io.hpp"
#include "slmetro/reconstruct.hpp"
#include "slmetro/rng.hpp"

using namespace slmetro;

namespace {

int g_failures = 0;

void report(int criterion, const char *name, bool pass, const std::string &detail) {
    std::printf("criterion %2d %-24s %s  (%s)\n", criterion, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char *f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// High-resolution stereo rig for the closed-loop criterion: long-throw
// projector and a wide baseline give micrometre-scale depth resolution per
// decoded projector column.
Calibration stiff_rig() {
    Calibration calib = default_calibration(DeviceScale::Quarter);
    calib.projector->intrinsics.fu = 4200.0;
    calib.projector->intrinsics.fv = 4200.0;
    Vec3 proj_center(450.0, 0.0, 0.0);
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

// Independent midpoint least-squares triangulation oracle.
Vec3 midpoint_triangulate(const Vec2 &m_cam, const Vec2 &m_proj, const Pose &cam_to_proj) {
    Vec3 d1(m_cam.x(), m_cam.y(), 1.0);
    Mat3 rt = cam_to_proj.rotation().transpose();
    Vec3 o2 = -(rt * cam_to_proj.translation());
    Vec3 d2 = rt * Vec3(m_proj.x(), m_proj.y(), 1.0);
    double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2);
    double p = d1.dot(o2), q = d2.dot(o2);
    double det = a * c - b * b;
    double s = (p * c - b * q) / det;
    double t = (b * p - a * q) / det;
    return 0.5 * (s * d1 + (o2 + t * d2));
}

Mat3 rotation_xyz(double ax, double ay, double az) {
    return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
            Eigen::AngleAxisd(ax, Vec3::UnitX()))
        .toRotationMatrix();
}

// ---- 1: projection / undistortion round trips ------------------------------

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    CameraModel cam;
    cam.intrinsics = {1450.0, 1410.0, 601.5, 412.25, 0.4};
    cam.distortion = {-0.12, 0.03, -0.004, 3e-4, -2e-4};
    double max_px = 0.0, max_nd = 0.0;
    for (uint64_t i = 0; i < 100000; ++i) {
        Vec3 m(60.0 * (2.0 * uniform(101, 1, i * 3) - 1.0),
               45.0 * (2.0 * uniform(101, 1, i * 3 + 1) - 1.0),
               150.0 + 300.0 * uniform(101, 1, i * 3 + 2));
        Vec2 px = project(m, cam);
        Vec2 n = pixel_to_normalized(px, cam);
        Vec2 re = project(Vec3(n.x() * m.z(), n.y() * m.z(), m.z()), cam);
        max_px = std::max(max_px, (re - px).cwiseAbs().maxCoeff());

        Vec2 p(0.45 * (2.0 * uniform(101, 2, i * 2) - 1.0),
               0.45 * (2.0 * uniform(101, 2, i * 2 + 1) - 1.0));
        Vec2 back = remove_distortion(apply_distortion(p, cam.distortion), cam.distortion);
        max_nd = std::max(max_nd, (back - p).cwiseAbs().maxCoeff());
    }
    double dt = seconds_since(t0);
    report(1, "geometry-round-trip", max_px < 1e-6 && max_nd < 1e-10 && dt < 10.0,
           fmt("max reprojection %.2e px, max undistortion %.2e, %.1f s", max_px, max_nd, dt));
}

// ---- 2: triangulation oracle equivalence ------------------------------------

void criterion_2() {
    double worst = 0.0;
    size_t n = 0;
    for (uint64_t i = 0; n < 10000; ++i) {
        Pose pose(rotation_xyz(0.4 * (uniform(102, 1, i * 9) - 0.5),
                               0.6 * (uniform(102, 1, i * 9 + 1) - 0.5),
                               0.4 * (uniform(102, 1, i * 9 + 2) - 0.5)),
                  Vec3(-180.0 + 60.0 * uniform(102, 1, i * 9 + 3),
                       30.0 * (uniform(102, 1, i * 9 + 4) - 0.5),
                       80.0 * (uniform(102, 1, i * 9 + 5) - 0.5)));
        Vec3 m(60.0 * (2.0 * uniform(102, 1, i * 9 + 6) - 1.0),
               45.0 * (2.0 * uniform(102, 1, i * 9 + 7) - 1.0),
               200.0 + 300.0 * uniform(102, 1, i * 9 + 8));
        Vec3 mp3 = pose.apply(m);
        if (mp3.z() < 10.0)
            continue;
        Vec2 mc(m.x() / m.z(), m.y() / m.z());
        Vec2 mp(mp3.x() / mp3.z(), mp3.y() / mp3.z());
        Vec3 closed = triangulate(mc, mp, pose);
        Vec3 oracle = midpoint_triangulate(mc, mp, pose);
        worst = std::max(worst, std::abs(closed.z() - oracle.z()) / std::abs(oracle.z()));
        ++n;
    }
    report(2, "triangulation-oracle", worst < 1e-9, fmt("max relative depth error %.2e", worst));
}

// ---- 3: laser-plane membership -----------------------------------------------

void criterion_3() {
    CameraModel cam;
    cam.intrinsics = {1200.0, 1180.0, 320.0, 256.0, 0.0};
    cam.distortion = {-0.08, 0.02, 0.0, 1e-4, -3e-4};
    double max_mm = 0.0, max_px = 0.0;
    for (uint64_t i = 0; i < 10000; ++i) {
        Vec3 n(0.3 * (2.0 * uniform(103, 1, i * 6) - 1.0),
               0.3 * (2.0 * uniform(103, 1, i * 6 + 1) - 1.0), 1.0);
        n.normalize();
        Vec3 m(25.0 * (2.0 * uniform(103, 1, i * 6 + 3) - 1.0),
               18.0 * (2.0 * uniform(103, 1, i * 6 + 4) - 1.0),
               150.0 + 120.0 * uniform(103, 1, i * 6 + 2));
        LaserPlane lp(n.x(), n.y(), n.z(), -n.dot(m));
        Vec2 px = project(m, cam);
        Vec3 hit = intersect_laser_plane(px, cam, lp);
        max_mm = std::max(max_mm,
                          std::abs(lp.a * hit.x() + lp.b * hit.y() + lp.c * hit.z() + lp.d));
        max_px = std::max(max_px, (project(hit, cam) - px).cwiseAbs().maxCoeff());
    }
    report(3, "laser-plane-membership", max_mm < 1e-9 && max_px < 1e-6,
           fmt("max plane residual %.2e mm, max reprojection %.2e px", max_mm, max_px));
}

// ---- 4: codec exactness --------------------------------------------------------

void criterion_4() {
    CodecConfig cfg; // 1280-wide projector
    PatternStack stack = generate_patterns(cfg);
    int bits = gray_bit_count(cfg);
    bool coarse_ok = true;
    for (int x = 0; x < cfg.proj_width && coarse_ok; ++x) {
        uint32_t code = 0;
        for (int b = 0; b < bits; ++b) {
            BinarizeResult r =
                binarize(stack.frames[b], stack.frames[bits + b], cfg.contrast_threshold);
            if (!r.confident.at(x, 0)) {
                coarse_ok = false;
                break;
            }
            code = (code << 1) | r.bit.at(x, 0);
        }
        if (gray_to_int(code) != static_cast<uint32_t>(x / cfg.stripe_period))
            coarse_ok = false;
    }
    bool adjacency_ok = true;
    for (uint32_t v = 0; v + 1 < (1u << 20); ++v) {
        uint32_t diff = int_to_gray(v) ^ int_to_gray(v + 1);
        if (diff == 0 || (diff & (diff - 1)) != 0) {
            adjacency_ok = false;
            break;
        }
    }
    report(4, "codec-exactness", coarse_ok && adjacency_ok,
           fmt("coarse decode %s, adjacency to 2^20 %s", coarse_ok ? "exact" : "broken",
               adjacency_ok ? "holds" : "broken"));
}

// ---- 5: closed-loop reconstruction --------------------------------------------

void criterion_5() {
    auto t0 = std::chrono::steady_clock::now();
    Calibration calib = stiff_rig();
    ArtifactSpec spec;
    WorkingRange range;
    PoseJitter none{0.0, 0.0};
    Scene scene = build_scene(spec, range, 0.0, none, SceneKind::Flat, 5);
    scene.flat_albedo = 0.95;
    CodecConfig cfg;
    cfg.stripe_period = 8;
    cfg.n_shifts = 24;
    PatternStack patterns = generate_patterns(cfg);
    NoiseModel noise;
    RenderedStack rendered = render_stack(scene, calib, patterns, noise);
    CorrespondenceMap map = decode(rendered.stack, cfg);
    PointGrid recon = reconstruct_grid(map, calib, 1);
    PointGrid truth = synthesize_grid(scene, calib, noise);

    size_t valid = 0, close = 0;
    for (size_t i = 0; i < truth.points.size(); ++i) {
        if (!recon.valid[i] || !truth.valid[i])
            continue;
        ++valid;
        if ((recon.points[i] - truth.points[i]).norm() < 1e-3)
            ++close;
    }
    double dt = seconds_since(t0);
    double frac = valid ? static_cast<double>(close) / valid : 0.0;
    report(5, "closed-loop", valid > 100000 && frac >= 0.99 && dt < 60.0,
           fmt("%.2f%% of %zu pixels within 1 um, %.1f s", 100.0 * frac, valid, dt));
}

// ---- 6/7: benchmark null test and bias recovery --------------------------------

void criterion_6() {
    RunConfig cfg;
    cfg.trials = 50;
    cfg.seed = 6;
    cfg.workers = 1;
    Calibration calib = resolve_calibration(cfg);
    BenchmarkReport rep = run_benchmark(cfg, calib);
    const MetricTuple &p = rep.metrics.at(Criterion::Flatness);
    const MetricTuple &h = rep.metrics.at(Criterion::Height);
    const MetricTuple &s = rep.metrics.at(Criterion::Sphericity);
    bool ok = p.mean_of_range < 1e-3 && h.mean_of_range < 1e-3 && s.mean_of_range < 1e-3 &&
              std::abs(p.mean_of_mean) < 1e-4 && std::abs(h.mean_of_mean) < 1e-4 &&
              std::abs(s.mean_of_mean) < 1e-4;
    report(6, "metric-null-test", ok,
           fmt("mu(R) um: E_p %.3g E_h %.3g E_s %.3g; mu(mu) um: %.3g %.3g %.3g",
               1e3 * p.mean_of_range, 1e3 * h.mean_of_range, 1e3 * s.mean_of_range,
               1e3 * p.mean_of_mean, 1e3 * h.mean_of_mean, 1e3 * s.mean_of_mean));
}

void criterion_7() {
    RunConfig cfg;
    cfg.trials = 50;
    cfg.seed = 7;
    cfg.workers = 1;
    cfg.sim_artifact = cfg.artifact;
    cfg.sim_artifact.marker_pitch += 0.005; // +5 um
    cfg.sim_artifact.block_height += 0.010; // +10 um
    cfg.sim_artifact.ball_radius += 0.003;  // +3 um
    Calibration calib = resolve_calibration(cfg);
    BenchmarkReport rep = run_benchmark(cfg, calib);
    double ed = 1e3 * rep.metrics.at(Criterion::Length).mean_of_mean;
    double eh = 1e3 * rep.metrics.at(Criterion::Height).mean_of_mean;
    double es = 1e3 * rep.metrics.at(Criterion::Sphericity).mean_of_mean;
    bool ok = std::abs(ed - 5.0) < 1.0 && std::abs(eh - 10.0) < 1.0 && std::abs(es - 3.0) < 1.0;
    report(7, "bias-recovery", ok,
           fmt("mu(mu) um: E_d %+.3f (want +5) E_h %+.3f (want +10) E_s %+.3f (want +3)", ed, eh,
               es));
}

// ---- 8: noise calibration --------------------------------------------------------

void criterion_8() {
    Calibration calib = default_calibration(DeviceScale::Quarter);
    ArtifactSpec spec;
    WorkingRange range;
    PoseJitter jitter;
    double sum = 0.0;
    int trials = 50;
    bool all_ok = true;
    for (int t = 0; t < trials; ++t) {
        Scene scene = build_scene(spec, range, 0.0, jitter, SceneKind::Flat, 800 + t);
        NoiseModel noise;
        noise.sigma_z = 5e-3;
        noise.seed = 880 + t;
        PointGrid grid = synthesize_grid(scene, calib, noise);
        Plane pl = fit_flat_robust(grid, 0.1, 3);
        std::vector<double> d;
        d.reserve(grid.points.size());
        for (size_t i = 0; i < grid.points.size(); ++i)
            if (grid.valid[i])
                d.push_back(pl.signed_distance(grid.points[i]));
        if (d.size() < 100000)
            all_ok = false;
        double std_mm = summarize_values(d).std;
        sum += std_mm;
        if (std::abs(std_mm - 5e-3) > 0.1 * 5e-3)
            all_ok = false;
    }
    double mean_um = 1e3 * sum / trials;
    report(8, "noise-calibration", all_ok,
           fmt("mean signed residual std %.3f um (target 5 +/- 0.5)", mean_um));
}

// ---- 9: TypeC coplanarity claim ----------------------------------------------------

void criterion_9() {
    Calibration calib = default_calibration(DeviceScale::Quarter);
    ArtifactSpec spec;
    WorkingRange range;
    PoseJitter jitter;
    int runs = 200, within = 0, fail_rule = 0;
    for (int r = 0; r < runs; ++r) {
        Scene scene = build_scene(spec, range, 0.0, jitter, SceneKind::Pins, 9000 + r, 0.025);
        NoiseModel noise;
        noise.sigma_z = 3e-4; // 0.3 um grid noise -> well under 0.1 um per averaged tip
        noise.seed = 9500 + r;
        PointGrid grid = synthesize_grid(scene, calib, noise);
        std::vector<Vec3> tips = extract_pin_tips(grid);
        if (tips.size() != 24)
            continue;
        double range_um = 1e3 * coplanarity_range(tips).range;
        if (std::abs(range_um - 25.0) < 0.3)
            ++within;
        if (range_um >= 10.0) // the ten-micrometre rule rejects this part
            ++fail_rule;
    }
    // A 5 um-spread part passes the same rule.
    int pass_rule = 0, small_runs = 20;
    for (int r = 0; r < small_runs; ++r) {
        Scene scene = build_scene(spec, range, 0.0, jitter, SceneKind::Pins, 9800 + r, 0.005);
        NoiseModel noise;
        noise.sigma_z = 3e-4;
        noise.seed = 9900 + r;
        std::vector<Vec3> tips = extract_pin_tips(synthesize_grid(scene, calib, noise));
        if (tips.size() == 24 && 1e3 * coplanarity_range(tips).range < 10.0)
            ++pass_rule;
    }
    bool ok = within >= static_cast<int>(0.95 * runs) && fail_rule == runs &&
              pass_rule == small_runs;
    report(9, "typec-coplanarity", ok,
           fmt("%d/%d within 0.3 um of 25 um; 10 um rule: %d/%d fail (25 um part), %d/%d pass "
               "(5 um part)",
               within, runs, fail_rule, runs, pass_rule, small_runs));
}

// ---- 10: filter sensitivity ---------------------------------------------------------

void criterion_10() {
    Calibration calib = default_calibration(DeviceScale::Quarter);
    ArtifactSpec spec;
    WorkingRange range;
    PoseJitter jitter;
    NoiseModel noise;
    int trials = 10;
    double es_sum = 0.0, ep_before = 0.0, ep_after = 0.0;
    bool all_negative = true;
    for (int t = 0; t < trials; ++t) {
        Scene scene = build_scene(spec, range, 0.0, jitter, SceneKind::Balls, 1000 + t);
        PointGrid grid = synthesize_grid(scene, calib, noise);
        PointGrid smoothed = smooth_grid(grid, 3);
        double es = summarize(eval_sphericity(smoothed, spec)).mean;
        es_sum += es;
        if (!(es < 0.0))
            all_negative = false;
        ep_before += summarize(eval_flatness(grid, {}, spec)).mean;
        ep_after += summarize(eval_flatness(smoothed, {}, spec)).mean;
    }
    double es_mean_um = 1e3 * es_sum / trials;
    double ep_shift_um = 1e3 * std::abs(ep_after - ep_before) / trials;
    bool ok = all_negative && es_mean_um < 0.0 && ep_shift_um < 0.1;
    report(10, "filter-sensitivity", ok,
           fmt("mu(mu(E_s)) %+.2f um after smoothing, |d mu(mu(E_p))| %.4f um", es_mean_um,
               ep_shift_um));
}

// ---- 11: statistics oracle -----------------------------------------------------------

void criterion_11() {
    double worst = 0.0;
    for (uint64_t set = 0; set < 1000; ++set) {
        size_t n = 2 + (hash_counter(111, 1, set) % 500);
        std::vector<double> v;
        std::vector<SummaryStats> trials;
        for (size_t i = 0; i < n; ++i)
            v.push_back(50.0 * (uniform(111, 2, set * 1000 + i) - 0.5));
        SummaryStats fast = summarize_values(v);
        // brute force: sorted range + two-pass moments
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        double mean = 0.0;
        for (double x : v)
            mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : v)
            var += (x - mean) * (x - mean);
        SummaryStats slow{sorted.back() - sorted.front(), mean, std::sqrt(var / n), n};
        auto rel = [](double a, double b) {
            return std::abs(a - b) / std::max(1.0, std::abs(b));
        };
        worst = std::max({worst, rel(fast.range, slow.range), rel(fast.mean, slow.mean),
                          rel(fast.std, slow.std)});

        // aggregate vs brute force across a few pseudo-trials
        for (int t = 0; t < 5; ++t)
            trials.push_back(SummaryStats{slow.range + t, slow.mean - t, slow.std + 0.5 * t,
                                          n});
        MetricTuple agg = aggregate(trials);
        std::vector<double> ranges, means;
        for (const SummaryStats &s : trials) {
            ranges.push_back(s.range);
            means.push_back(s.mean);
        }
        double mr = 0.0, mm = 0.0;
        for (size_t i = 0; i < trials.size(); ++i) {
            mr += ranges[i];
            mm += means[i];
        }
        mr /= trials.size();
        mm /= trials.size();
        double vr = 0.0, vm = 0.0;
        for (size_t i = 0; i < trials.size(); ++i) {
            vr += (ranges[i] - mr) * (ranges[i] - mr);
            vm += (means[i] - mm) * (means[i] - mm);
        }
        worst = std::max({worst, rel(agg.mean_of_range, mr), rel(agg.mean_of_mean, mm),
                          rel(agg.std_of_range, std::sqrt(vr / trials.size())),
                          rel(agg.std_of_mean, std::sqrt(vm / trials.size()))});
    }
    report(11, "statistics-oracle", worst < 1e-12, fmt("max relative deviation %.2e", worst));
}

// ---- 12: report fidelity ---------------------------------------------------------------

void criterion_12() {
    BenchmarkReport rep;
    rep.device = "replay";
    rep.trials = 50;
    MetricTuple d;
    d.mean_of_range = 0.01891;
    d.std_of_range = 4.1e-5;
    d.mean_of_mean = 0.0047;
    d.std_of_mean = 7e-6;
    d.trials = 50;
    rep.metrics[Criterion::Length] = d;
    std::string table = render_report(rep).table;
    bool ok = table.find("E_d | 18.91 um | 0.041 | 4.7 um | 0.007") != std::string::npos;
    report(12, "report-fidelity", ok, ok ? "published length row rendered verbatim"
                                         : "row mismatch:\n" + table);
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    if (g_failures == 0) {
        std::printf("all 12 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
