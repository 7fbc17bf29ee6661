#include "slmetro/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>

namespace slmetro {

size_t PointGrid::count_valid() const {
    size_t n = 0;
    for (uint8_t v : valid)
        n += v != 0;
    return n;
}

std::vector<Vec3> PointGrid::valid_points() const {
    std::vector<Vec3> out;
    out.reserve(count_valid());
    for (size_t i = 0; i < points.size(); ++i)
        if (valid[i])
            out.push_back(points[i]);
    return out;
}

Plane fit_plane(std::span<const Vec3> points, int min_count) {
    if (min_count < 3)
        min_count = 3;
    if (points.size() < static_cast<size_t>(min_count))
        throw DegenerateInput("fit_plane: need at least " + std::to_string(min_count) +
                              " points, got " + std::to_string(points.size()));
    Vec3 centroid = Vec3::Zero();
    for (const Vec3 &p : points)
        centroid += p;
    centroid /= static_cast<double>(points.size());

    Mat3 cov = Mat3::Zero();
    for (const Vec3 &p : points) {
        Vec3 q = p - centroid;
        cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // Eigenvalues ascending: [0] normal direction, [1] must be nonzero or
    // the points are collinear.
    double scale = std::max(eig.eigenvalues()[2], 1e-300);
    if (eig.eigenvalues()[1] / scale < 1e-12)
        throw DegenerateInput("fit_plane: points are collinear");
    Vec3 n = eig.eigenvectors().col(0);

    int imax = 0;
    n.cwiseAbs().maxCoeff(&imax);
    if (n[imax] < 0)
        n = -n;
    return {n.x(), n.y(), n.z(), -n.dot(centroid)};
}

Plane oriented_toward(const Plane &pl, const Vec3 &ref) {
    return pl.signed_distance(ref) >= 0 ? pl : pl.flipped();
}

double point_plane_distance(const Vec3 &p, const Plane &pl) {
    return std::abs(pl.signed_distance(p));
}

namespace {

double sphere_rms(std::span<const Vec3> points, const Sphere &s) {
    double acc = 0.0;
    for (const Vec3 &p : points) {
        double r = (p - s.center).norm() - s.radius;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(points.size()));
}

} // namespace

Sphere fit_sphere(std::span<const Vec3> points) {
    if (points.size() < 4)
        throw DegenerateInput("fit_sphere: need at least 4 points");

    Vec3 centroid = Vec3::Zero();
    for (const Vec3 &p : points)
        centroid += p;
    centroid /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const Vec3 &p : points) {
        Vec3 q = p - centroid;
        cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()[0] / std::max(eig.eigenvalues()[2], 1e-300) < 1e-12)
        throw DegenerateInput("fit_sphere: points are coplanar");

    // Algebraic stage: linear in (center, |c|^2 - r^2). Centered
    // coordinates keep the normal equations well conditioned far from the
    // origin.
    Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
    Eigen::Vector4d atb = Eigen::Vector4d::Zero();
    for (const Vec3 &p : points) {
        Vec3 q = p - centroid;
        Eigen::Vector4d row(2.0 * q.x(), 2.0 * q.y(), 2.0 * q.z(), 1.0);
        double rhs = q.squaredNorm();
        ata += row * row.transpose();
        atb += row * rhs;
    }
    Eigen::Vector4d sol = ata.ldlt().solve(atb);
    Vec3 center = centroid + sol.head<3>();
    double r2 = sol[3] + sol.head<3>().squaredNorm();
    if (!(r2 > 0.0))
        throw DegenerateInput("fit_sphere: algebraic stage produced nonpositive radius");
    Sphere best{center, std::sqrt(r2)};
    double best_rms = sphere_rms(points, best);

    // Geometric refinement: damped Gauss-Newton on |p - c| - r.
    Sphere cur = best;
    double lambda = 1e-6;
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
        Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
        for (const Vec3 &p : points) {
            Vec3 diff = p - cur.center;
            double dist = diff.norm();
            if (dist < 1e-12)
                continue;
            Eigen::Vector4d j;
            j.head<3>() = -diff / dist;
            j[3] = -1.0;
            jtj += j * j.transpose();
            jtr += j * (dist - cur.radius);
        }
        if (jtr.norm() <= 1e-10)
            break;
        Eigen::Matrix4d damped = jtj + lambda * Eigen::Matrix4d(jtj.diagonal().asDiagonal());
        Eigen::Vector4d step = damped.ldlt().solve(-jtr);
        Sphere trial{cur.center + step.head<3>(), cur.radius + step[3]};
        if (trial.radius > 0.0 && sphere_rms(points, trial) <= sphere_rms(points, cur)) {
            cur = trial;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (step.norm() <= 1e-12 * (1.0 + cur.radius))
                break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e8)
                break;
        }
    }
    if (sphere_rms(points, cur) <= best_rms)
        best = cur;
    return best;
}

namespace {

struct Gradients {
    std::vector<float> gx, gy, mag;
};

Gradients sobel(const Image8 &img) {
    Gradients g;
    size_t n = img.pixels.size();
    g.gx.assign(n, 0.f);
    g.gy.assign(n, 0.f);
    g.mag.assign(n, 0.f);
    for (int y = 1; y + 1 < img.height; ++y) {
        for (int x = 1; x + 1 < img.width; ++x) {
            int p00 = img.at(x - 1, y - 1), p10 = img.at(x, y - 1), p20 = img.at(x + 1, y - 1);
            int p01 = img.at(x - 1, y), p21 = img.at(x + 1, y);
            int p02 = img.at(x - 1, y + 1), p12 = img.at(x, y + 1), p22 = img.at(x + 1, y + 1);
            float gx = static_cast<float>((p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02));
            float gy = static_cast<float>((p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20));
            size_t i = static_cast<size_t>(y) * img.width + x;
            g.gx[i] = gx;
            g.gy[i] = gy;
            g.mag[i] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return g;
}

// Darkness-weighted centroid of the ring ink around an estimated circle.
// Each pass re-estimates the ring radius as the darkness-weighted mean
// radius, so the centroid window stays symmetric around the ink band and
// does not bias the center when the accumulator radius is off by a pixel.
Circle2 refine_center_intensity(const Image8 &img, Circle2 c) {
    for (int pass = 0; pass < 4; ++pass) {
        double outer = 1.6 * c.radius + 2.0;
        int x0 = std::max(0, static_cast<int>(std::floor(c.center.x() - outer)));
        int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.center.x() + outer)));
        int y0 = std::max(0, static_cast<int>(std::floor(c.center.y() - outer)));
        int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.center.y() + outer)));
        // Background level from rings well inside and outside the ink band.
        double bg = 0.0;
        int nbg = 0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double d = (Vec2(x, y) - c.center).norm();
                if (d < 0.35 * c.radius || (d > 1.35 * c.radius && d < outer)) {
                    bg += img.at(x, y);
                    ++nbg;
                }
            }
        }
        if (nbg == 0)
            return c;
        bg /= nbg;
        double wsum = 0.0, cx = 0.0, cy = 0.0, rsum = 0.0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double d = (Vec2(x, y) - c.center).norm();
                if (d < 0.5 * c.radius || d > 1.5 * c.radius)
                    continue;
                double w = bg - img.at(x, y);
                if (w <= 0)
                    continue;
                wsum += w;
                cx += w * x;
                cy += w * y;
                rsum += w * d;
            }
        }
        if (wsum <= 0)
            return c;
        c.center = Vec2(cx / wsum, cy / wsum);
        c.radius = rsum / wsum;
    }
    return c;
}

} // namespace

std::vector<Circle2> hough_circles(const Image8 &image, double r_min, double r_max,
                                   const HoughParams &params) {
    if (!(r_min < r_max) || r_min <= 0)
        throw InvalidConfig("hough_circles: need 0 < r_min < r_max");
    if (image.width <= 2 || image.height <= 2)
        return {};

    Gradients g = sobel(image);
    std::vector<int> acc(image.pixels.size(), 0);
    for (int y = 1; y + 1 < image.height; ++y) {
        for (int x = 1; x + 1 < image.width; ++x) {
            size_t i = static_cast<size_t>(y) * image.width + x;
            if (g.mag[i] < params.grad_threshold)
                continue;
            double dx = g.gx[i] / g.mag[i], dy = g.gy[i] / g.mag[i];
            for (int sign = -1; sign <= 1; sign += 2) {
                for (double r = r_min; r <= r_max; r += params.radius_step) {
                    int cx = static_cast<int>(std::lround(x + sign * r * dx));
                    int cy = static_cast<int>(std::lround(y + sign * r * dy));
                    if (cx >= 0 && cx < image.width && cy >= 0 && cy < image.height)
                        ++acc[static_cast<size_t>(cy) * image.width + cx];
                }
            }
        }
    }

    double min_sep = params.min_center_dist > 0 ? params.min_center_dist : r_min;
    std::vector<Circle2> peaks;
    for (int y = 1; y + 1 < image.height; ++y) {
        for (int x = 1; x + 1 < image.width; ++x) {
            int v = acc[static_cast<size_t>(y) * image.width + x];
            if (v < params.min_votes)
                continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0)
                        continue;
                    int nv = acc[static_cast<size_t>(y + dy) * image.width + (x + dx)];
                    if (nv > v || (nv == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max)
                peaks.push_back({Vec2(x, y), 0.0, static_cast<double>(v)});
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const Circle2 &a, const Circle2 &b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.center.y() != b.center.y())
            return a.center.y() < b.center.y();
        return a.center.x() < b.center.x();
    });

    std::vector<Circle2> out;
    for (const Circle2 &p : peaks) {
        bool clashes = false;
        for (const Circle2 &kept : out)
            if ((kept.center - p.center).norm() < min_sep) {
                clashes = true;
                break;
            }
        if (clashes)
            continue;

        // Subpixel center from the accumulator neighborhood.
        Circle2 c = p;
        double wsum = 0, cx = 0, cy = 0;
        for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
                int xx = static_cast<int>(p.center.x()) + dx;
                int yy = static_cast<int>(p.center.y()) + dy;
                if (xx < 0 || xx >= image.width || yy < 0 || yy >= image.height)
                    continue;
                double w = acc[static_cast<size_t>(yy) * image.width + xx];
                wsum += w;
                cx += w * xx;
                cy += w * yy;
            }
        }
        if (wsum > 0)
            c.center = Vec2(cx / wsum, cy / wsum);

        // Radius from the edge-distance histogram around this center.
        int nbins = static_cast<int>((r_max - r_min) / params.radius_step) + 3;
        std::vector<double> hist(nbins, 0.0);
        for (int y = 1; y + 1 < image.height; ++y) {
            for (int x = 1; x + 1 < image.width; ++x) {
                size_t i = static_cast<size_t>(y) * image.width + x;
                if (g.mag[i] < params.grad_threshold)
                    continue;
                double d = (Vec2(x, y) - c.center).norm();
                if (d < r_min - params.radius_step || d > r_max + params.radius_step)
                    continue;
                int bin = static_cast<int>((d - (r_min - params.radius_step)) / params.radius_step);
                if (bin >= 0 && bin < nbins)
                    hist[bin] += 1.0;
            }
        }
        int bmax = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
        // Mean distance within one step of the peak bin.
        double rsum = 0, wn = 0;
        for (int y = 1; y + 1 < image.height; ++y) {
            for (int x = 1; x + 1 < image.width; ++x) {
                size_t i = static_cast<size_t>(y) * image.width + x;
                if (g.mag[i] < params.grad_threshold)
                    continue;
                double d = (Vec2(x, y) - c.center).norm();
                double rb = r_min - params.radius_step + (bmax + 0.5) * params.radius_step;
                if (std::abs(d - rb) <= params.radius_step) {
                    rsum += d;
                    wn += 1.0;
                }
            }
        }
        if (wn == 0)
            continue;
        c.radius = rsum / wn;
        if (params.refine_intensity)
            c = refine_center_intensity(image, c);
        out.push_back(c);
    }
    return out;
}

PointGrid mask_circle_regions(const PointGrid &grid, const std::vector<Circle2> &circles,
                              double radius_factor) {
    PointGrid out = grid;
    for (const Circle2 &c : circles) {
        double r = radius_factor * c.radius;
        int x0 = std::max(0, static_cast<int>(std::floor(c.center.x() - r)));
        int x1 = std::min(grid.width - 1, static_cast<int>(std::ceil(c.center.x() + r)));
        int y0 = std::max(0, static_cast<int>(std::floor(c.center.y() - r)));
        int y1 = std::min(grid.height - 1, static_cast<int>(std::ceil(c.center.y() + r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if ((Vec2(x, y) - c.center).norm() <= r)
                    out.valid[out.index(x, y)] = 0;
    }
    return out;
}

std::vector<GridComponent> segment_above_plane(const PointGrid &grid, const Plane &pl,
                                               double height_threshold) {
    if (height_threshold <= 0)
        throw InvalidConfig("segment_above_plane: height_threshold must be > 0");
    std::vector<uint8_t> above(grid.points.size(), 0);
    for (size_t i = 0; i < grid.points.size(); ++i)
        above[i] = grid.valid[i] && pl.signed_distance(grid.points[i]) > height_threshold;

    std::vector<GridComponent> comps;
    std::vector<uint8_t> seen(grid.points.size(), 0);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            size_t start = grid.index(x, y);
            if (!above[start] || seen[start])
                continue;
            GridComponent comp;
            std::deque<std::pair<int, int>> queue{{x, y}};
            seen[start] = 1;
            while (!queue.empty()) {
                auto [cx, cy] = queue.front();
                queue.pop_front();
                size_t ci = grid.index(cx, cy);
                comp.pixel_indices.push_back(ci);
                comp.points.push_back(grid.points[ci]);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if ((dx == 0 && dy == 0) || nx < 0 || nx >= grid.width || ny < 0 ||
                            ny >= grid.height)
                            continue;
                        size_t ni = grid.index(nx, ny);
                        if (above[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            queue.emplace_back(nx, ny);
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
    }
    std::sort(comps.begin(), comps.end(), [](const GridComponent &a, const GridComponent &b) {
        if (a.points.size() != b.points.size())
            return a.points.size() > b.points.size();
        return a.pixel_indices.front() < b.pixel_indices.front();
    });
    return comps;
}

std::optional<Vec3> grid_interpolate(const PointGrid &grid, const Vec2 &pixel) {
    int x0 = static_cast<int>(std::floor(pixel.x()));
    int y0 = static_cast<int>(std::floor(pixel.y()));
    if (x0 < 0 || y0 < 0 || x0 + 1 >= grid.width || y0 + 1 >= grid.height)
        return std::nullopt;
    double tx = pixel.x() - x0, ty = pixel.y() - y0;
    if (grid.is_valid(x0, y0) && grid.is_valid(x0 + 1, y0) && grid.is_valid(x0, y0 + 1) &&
        grid.is_valid(x0 + 1, y0 + 1)) {
        Vec3 top = (1 - tx) * grid.at(x0, y0) + tx * grid.at(x0 + 1, y0);
        Vec3 bot = (1 - tx) * grid.at(x0, y0 + 1) + tx * grid.at(x0 + 1, y0 + 1);
        return (1 - ty) * top + ty * bot;
    }
    // Incomplete cell: nearest valid neighbor in a small window.
    double best_d = 1e30;
    std::optional<Vec3> best;
    for (int y = std::max(0, y0 - 2); y <= std::min(grid.height - 1, y0 + 3); ++y) {
        for (int x = std::max(0, x0 - 2); x <= std::min(grid.width - 1, x0 + 3); ++x) {
            if (!grid.is_valid(x, y))
                continue;
            double d = (Vec2(x, y) - pixel).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = grid.at(x, y);
            }
        }
    }
    return best;
}

} // namespace slmetro
