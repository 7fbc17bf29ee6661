#include "slmetro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace slmetro {

namespace {

double median(std::vector<double> v) {
    if (v.empty())
        throw EmptySamples("median of empty set");
    size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2)
        return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

std::string fmt_um(double mm) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", mm * 1000.0);
    return buf;
}

} // namespace

std::vector<Vec2> default_ball_layout(const ArtifactSpec &spec) {
    int rows = std::max(1, static_cast<int>(std::floor(std::sqrt(spec.ball_count))));
    int cols = (spec.ball_count + rows - 1) / rows;
    double pitch = std::max(12.0, 5.0 * spec.ball_radius);
    std::vector<Vec2> out;
    for (int i = 0; i < spec.ball_count; ++i) {
        int r = i / cols, c = i % cols;
        out.emplace_back((c - (cols - 1) / 2.0) * pitch, (r - (rows - 1) / 2.0) * pitch);
    }
    return out;
}

std::vector<Vec2> default_pin_layout(const ArtifactSpec &spec) {
    int rows = spec.pin_count > 1 ? 2 : 1;
    int cols = (spec.pin_count + rows - 1) / rows;
    std::vector<Vec2> out;
    for (int i = 0; i < spec.pin_count; ++i) {
        int r = i / cols, c = i % cols;
        out.emplace_back((c - (cols - 1) / 2.0) * spec.pin_pitch,
                         (r - (rows - 1) / 2.0) * spec.pin_pitch);
    }
    return out;
}

void validate_artifact(const ArtifactSpec &spec) {
    auto positive = [](double v, const char *name) {
        if (!(v > 0))
            throw InvalidConfig(std::string(name) + " must be positive");
    };
    positive(spec.marker_pitch, "marker_pitch");
    positive(spec.marker_radius, "marker_radius");
    positive(spec.marker_ink_halfwidth, "marker_ink_halfwidth");
    positive(spec.block_height, "block_height");
    positive(spec.block_size_x, "block_size_x");
    positive(spec.block_size_y, "block_size_y");
    positive(spec.ball_radius, "ball_radius");
    positive(spec.pin_pitch, "pin_pitch");
    positive(spec.pin_radius, "pin_radius");
    positive(spec.pin_height, "pin_height");
    positive(spec.flat_half_x, "flat_half_x");
    positive(spec.flat_half_y, "flat_half_y");
    if (spec.marker_rows < 1 || spec.marker_cols < 1)
        throw InvalidConfig("marker grid must be at least 1x1");
    if (spec.ball_count < 1)
        throw InvalidConfig("ball_count must be at least 1");
    if (spec.pin_count < 2)
        throw InvalidConfig("pin_count must be at least 2");
    if (2.0 * spec.pin_radius >= spec.pin_pitch)
        throw InvalidConfig("pins overlap: pin_pitch must exceed the pin diameter");
    if (!spec.ball_positions.empty() &&
        spec.ball_positions.size() != static_cast<size_t>(spec.ball_count))
        throw InvalidConfig("ball_positions size disagrees with ball_count");
}

const char *criterion_label(Criterion c) {
    switch (c) {
    case Criterion::Length:
        return "E_d";
    case Criterion::Flatness:
        return "E_p";
    case Criterion::Height:
        return "E_h";
    case Criterion::Sphericity:
        return "E_s";
    }
    return "?";
}

SummaryStats summarize_values(std::span<const double> values) {
    if (values.empty())
        throw EmptySamples("summarize of empty sample set");
    SummaryStats s;
    s.n = values.size();
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.range = *hi - *lo;
    if (s.range == 0.0) { // identical samples: keep mean and std exact
        s.mean = *lo;
        s.std = 0.0;
        return s;
    }
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    double var = 0.0;
    for (double v : values)
        var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / s.n);
    return s;
}

SummaryStats summarize(const ErrorSamples &samples) { return summarize_values(samples.values); }

MetricTuple aggregate(const std::vector<SummaryStats> &trials) {
    if (trials.empty())
        throw EmptyTrials("aggregate of empty trial list");
    std::vector<double> ranges, means, stds;
    for (const SummaryStats &s : trials) {
        ranges.push_back(s.range);
        means.push_back(s.mean);
        stds.push_back(s.std);
    }
    SummaryStats r = summarize_values(ranges);
    SummaryStats m = summarize_values(means);
    SummaryStats d = summarize_values(stds);
    MetricTuple t;
    t.mean_of_range = r.mean;
    t.std_of_range = r.std;
    t.mean_of_mean = m.mean;
    t.std_of_mean = m.std;
    t.mean_of_std = d.mean;
    t.std_of_std = d.std;
    t.trials = trials.size();
    return t;
}

RenderedReport render_report(const BenchmarkReport &report) {
    RenderedReport out;
    std::ostringstream table, csv;
    table << "device: " << report.device << ", trials: " << report.trials << "\n";
    table << "criterion | mu(R) | sigma(R) | mu(mu) | sigma(mu)\n";
    csv << "criterion,mean_range_um,std_range_um,mean_mean_um,std_mean_um,trials\n";
    for (Criterion c : kAllCriteria) {
        auto it = report.metrics.find(c);
        if (it == report.metrics.end()) {
            table << criterion_label(c) << " | skipped\n";
            csv << criterion_label(c) << ",,,,,0\n";
            continue;
        }
        const MetricTuple &m = it->second;
        table << criterion_label(c) << " | " << fmt_um(m.mean_of_range) << " um | "
              << fmt_um(m.std_of_range) << " | " << fmt_um(m.mean_of_mean) << " um | "
              << fmt_um(m.std_of_mean) << "\n";
        csv << criterion_label(c) << "," << fmt_um(m.mean_of_range) << ","
            << fmt_um(m.std_of_range) << "," << fmt_um(m.mean_of_mean) << ","
            << fmt_um(m.std_of_mean) << "," << m.trials << "\n";
    }
    out.table = table.str();
    out.csv = csv.str();
    return out;
}

// ---- Robust flat and coplanarity -------------------------------------------

Plane fit_flat_robust(const PointGrid &grid, double band, int iterations) {
    std::vector<Vec3> pts = grid.valid_points();
    if (pts.size() < 100)
        throw DegenerateInput("too few valid points for a flat estimate");
    Plane pl = oriented_toward(fit_plane(pts), Vec3::Zero());
    for (int it = 0; it < iterations; ++it) {
        std::vector<Vec3> inliers;
        inliers.reserve(pts.size());
        for (const Vec3 &p : pts)
            if (std::abs(pl.signed_distance(p)) < band)
                inliers.push_back(p);
        if (inliers.size() < 100)
            throw DegenerateInput("robust flat fit lost its support");
        pl = oriented_toward(fit_plane(inliers), Vec3::Zero());
    }
    return pl;
}

CoplanarityResult coplanarity_range(std::span<const Vec3> points) {
    CoplanarityResult res;
    res.plane = fit_plane(points);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Vec3 &p : points) {
        double d = res.plane.signed_distance(p);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    res.range = hi - lo;
    return res;
}

// ---- Marker detection and the length criterion ------------------------------

std::vector<Circle2> detect_markers(const Image8 &texture, const PointGrid &grid,
                                    const ArtifactSpec &spec, const Calibration &calib,
                                    const HoughParams &hough) {
    std::vector<double> depths;
    for (size_t i = 0; i < grid.valid.size(); ++i)
        if (grid.valid[i])
            depths.push_back(grid.points[i].z());
    if (depths.size() < 100)
        throw InsufficientMarkers("too few valid grid points to scale marker search");
    double z = median(std::move(depths));
    double r_px = spec.marker_radius * calib.camera.intrinsics.fu / z;
    HoughParams params = hough;
    if (params.min_center_dist <= 0)
        params.min_center_dist = 0.5 * spec.marker_pitch * calib.camera.intrinsics.fu / z;
    return hough_circles(texture, 0.6 * r_px, 1.4 * r_px, params);
}

namespace {

// Orders detected circle centers into the rows x cols marker lattice.
// Throws InsufficientMarkers when the lattice cannot be recovered.
std::vector<std::vector<Vec2>> order_marker_grid(std::vector<Vec2> centers, int rows, int cols) {
    size_t expected = static_cast<size_t>(rows) * cols;
    if (centers.size() != expected)
        throw InsufficientMarkers("marker count mismatch");

    Vec2 mean = Vec2::Zero();
    for (const Vec2 &c : centers)
        mean += c;
    mean /= static_cast<double>(centers.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Vec2 &c : centers)
        cov += (c - mean) * (c - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    Vec2 axis = eig.eigenvectors().col(1); // dominant (column) direction
    double base = std::atan2(axis.y(), axis.x());

    for (double theta : {base, base + M_PI / 2}) {
        double ct = std::cos(-theta), st = std::sin(-theta);
        std::vector<std::pair<Vec2, Vec2>> rot; // (rotated, original)
        for (const Vec2 &c : centers)
            rot.push_back({Vec2(ct * c.x() - st * c.y(), st * c.x() + ct * c.y()), c});
        std::sort(rot.begin(), rot.end(),
                  [](const auto &a, const auto &b) { return a.first.y() < b.first.y(); });

        // Split on the rows-1 largest gaps in sorted y'.
        std::vector<std::pair<double, size_t>> gaps;
        for (size_t i = 1; i < rot.size(); ++i)
            gaps.push_back({rot[i].first.y() - rot[i - 1].first.y(), i});
        std::sort(gaps.begin(), gaps.end(), std::greater<>());
        std::vector<size_t> cuts;
        for (int i = 0; i < rows - 1 && i < static_cast<int>(gaps.size()); ++i)
            cuts.push_back(gaps[i].second);
        std::sort(cuts.begin(), cuts.end());

        std::vector<std::vector<Vec2>> lattice;
        size_t start = 0;
        bool ok = true;
        for (int r = 0; r < rows; ++r) {
            size_t end = r + 1 < rows ? cuts[r] : rot.size();
            if (end - start != static_cast<size_t>(cols)) {
                ok = false;
                break;
            }
            std::vector<std::pair<Vec2, Vec2>> row(rot.begin() + start, rot.begin() + end);
            std::sort(row.begin(), row.end(),
                      [](const auto &a, const auto &b) { return a.first.x() < b.first.x(); });
            std::vector<Vec2> originals;
            for (const auto &p : row)
                originals.push_back(p.second);
            lattice.push_back(std::move(originals));
            start = end;
        }
        if (ok)
            return lattice;
    }
    throw InsufficientMarkers("marker lattice recovery failed");
}

} // namespace

ErrorSamples eval_length(const PointGrid &grid, const Image8 &texture, const ArtifactSpec &spec,
                         const Calibration &calib, const HoughParams &hough) {
    std::vector<Circle2> circles = detect_markers(texture, grid, spec, calib, hough);
    size_t expected = static_cast<size_t>(spec.marker_rows) * spec.marker_cols;
    if (circles.size() < expected)
        throw InsufficientMarkers("detected " + std::to_string(circles.size()) +
                                  " markers, expected " + std::to_string(expected));
    // hough_circles sorts by descending score; keep the strongest peaks.
    std::vector<Vec2> centers;
    for (size_t i = 0; i < expected; ++i)
        centers.push_back(circles[i].center);
    std::vector<std::vector<Vec2>> lattice =
        order_marker_grid(std::move(centers), spec.marker_rows, spec.marker_cols);

    std::vector<std::vector<Vec3>> points(spec.marker_rows,
                                          std::vector<Vec3>(spec.marker_cols));
    for (int r = 0; r < spec.marker_rows; ++r)
        for (int c = 0; c < spec.marker_cols; ++c) {
            std::optional<Vec3> p = grid_interpolate(grid, lattice[r][c]);
            if (!p)
                throw InsufficientMarkers("marker center has no 3D data");
            points[r][c] = *p;
        }

    ErrorSamples out{Criterion::Length, {}};
    for (int r = 0; r < spec.marker_rows; ++r)
        for (int c = 0; c + 1 < spec.marker_cols; ++c)
            out.values.push_back((points[r][c + 1] - points[r][c]).norm() - spec.marker_pitch);
    for (int r = 0; r + 1 < spec.marker_rows; ++r)
        for (int c = 0; c < spec.marker_cols; ++c)
            out.values.push_back((points[r + 1][c] - points[r][c]).norm() - spec.marker_pitch);
    return out;
}

// ---- Flatness ---------------------------------------------------------------

ErrorSamples eval_flatness(const PointGrid &grid, const std::vector<Circle2> &circles,
                           const ArtifactSpec &spec, double radius_factor) {
    (void)spec;
    PointGrid masked = mask_circle_regions(grid, circles, radius_factor);
    Plane pl = fit_flat_robust(masked);
    ErrorSamples out{Criterion::Flatness, {}};
    for (size_t i = 0; i < masked.valid.size(); ++i) {
        if (!masked.valid[i])
            continue;
        double d = std::abs(pl.signed_distance(masked.points[i]));
        if (d <= 0.1)
            out.values.push_back(d);
    }
    if (out.values.empty())
        throw DegenerateInput("no flat points within the flatness band");
    return out;
}

// ---- Height -----------------------------------------------------------------

ErrorSamples eval_height(const PointGrid &grid, const std::vector<Circle2> &circles,
                         const ArtifactSpec &spec) {
    PointGrid masked = mask_circle_regions(grid, circles, 1.2);
    Plane pl = fit_flat_robust(masked);
    std::vector<GridComponent> comps = segment_above_plane(masked, pl, 0.1);

    double diag_c = std::hypot(spec.block_size_x, spec.block_size_y);
    for (const GridComponent &comp : comps) {
        if (comp.points.size() < 100)
            continue;
        Vec3 lo = comp.points.front(), hi = comp.points.front();
        std::vector<double> heights;
        heights.reserve(comp.points.size());
        for (const Vec3 &p : comp.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
            heights.push_back(pl.signed_distance(p));
        }
        double diag = std::hypot(hi.x() - lo.x(), hi.y() - lo.y());
        if (diag < 0.5 * diag_c || diag > 1.5 * diag_c)
            continue;

        // Keep only top-face points: tightly banded around the median
        // height so wall-grazing pixels do not bias the result.
        double med = median(heights);
        std::vector<double> top;
        for (double h : heights)
            if (std::abs(h - med) <= 0.05)
                top.push_back(h);
        if (top.size() >= 50) {
            double m = std::accumulate(top.begin(), top.end(), 0.0) / top.size();
            double var = 0.0;
            for (double h : top)
                var += (h - m) * (h - m);
            double band = std::max(0.05, 6.0 * std::sqrt(var / top.size()));
            top.clear();
            for (double h : heights)
                if (std::abs(h - med) <= band)
                    top.push_back(h);
        }
        if (top.size() < 50)
            continue;
        ErrorSamples out{Criterion::Height, {}};
        for (double h : top)
            out.values.push_back(h - spec.block_height);
        return out;
    }
    throw NoBlockFound("no component matches the certified block footprint");
}

// ---- Sphericity -------------------------------------------------------------

ErrorSamples eval_sphericity(const PointGrid &grid, const ArtifactSpec &spec) {
    Plane pl = fit_flat_robust(grid);
    std::vector<GridComponent> comps = segment_above_plane(grid, pl, 0.1);
    std::vector<uint8_t> member(grid.points.size(), 0);
    ErrorSamples out{Criterion::Sphericity, {}};
    for (const GridComponent &comp : comps) {
        if (comp.points.size() < 50)
            continue;
        // Erode the silhouette by one pixel: boundary samples mix ball and
        // background depths (and any smoothing blends them further), which
        // would otherwise dominate the fit.
        for (size_t idx : comp.pixel_indices)
            member[idx] = 1;
        std::vector<Vec3> interior;
        interior.reserve(comp.points.size());
        for (size_t i = 0; i < comp.pixel_indices.size(); ++i) {
            size_t idx = comp.pixel_indices[i];
            int x = static_cast<int>(idx % grid.width);
            int y = static_cast<int>(idx / grid.width);
            bool inner = x > 0 && x < grid.width - 1 && y > 0 && y < grid.height - 1;
            for (int dy = -1; inner && dy <= 1; ++dy)
                for (int dx = -1; inner && dx <= 1; ++dx)
                    inner = member[grid.index(x + dx, y + dy)];
            if (inner)
                interior.push_back(comp.points[i]);
        }
        for (size_t idx : comp.pixel_indices)
            member[idx] = 0;
        if (interior.size() < 50)
            continue;
        Sphere s;
        try {
            s = fit_sphere(interior);
        } catch (const DegenerateInput &) {
            continue;
        }
        if (s.radius < 0.3 * spec.ball_radius || s.radius > 3.0 * spec.ball_radius)
            continue;
        out.values.push_back(s.radius - spec.ball_radius);
    }
    if (out.values.empty())
        throw NoBallsFound("no ball-sized components found above the flat");
    return out;
}

// ---- Pin tips ---------------------------------------------------------------

std::vector<Vec3> extract_pin_tips(const PointGrid &grid, size_t min_component_points) {
    Plane pl = fit_flat_robust(grid);
    std::vector<GridComponent> comps = segment_above_plane(grid, pl, 0.1);
    std::vector<Vec3> tips;
    for (const GridComponent &comp : comps) {
        if (comp.points.size() < min_component_points)
            continue;
        // The cap dominates the component (the walls are near-vertical), so
        // the median height sits on the cap; a tight band around it rejects
        // wall-grazing pixels that reconstruct tens of micrometres low.
        std::vector<double> heights;
        heights.reserve(comp.points.size());
        for (const Vec3 &p : comp.points)
            heights.push_back(pl.signed_distance(p));
        double med = median(heights);
        Vec3 acc = Vec3::Zero();
        int n = 0;
        for (const Vec3 &p : comp.points) {
            if (std::abs(pl.signed_distance(p) - med) <= 0.01) {
                acc += p;
                ++n;
            }
        }
        if (n > 0)
            tips.push_back(acc / n);
    }
    return tips;
}

} // namespace slmetro
