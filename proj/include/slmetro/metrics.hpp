#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slmetro/calibration.hpp"
#include "slmetro/fitting.hpp"
#include "slmetro/image.hpp"

namespace slmetro {

// Certified dimensions of the benchmark artifacts. All lengths in mm.
struct ArtifactSpec {
    double marker_pitch = 20.0; // l_c
    int marker_rows = 4;
    int marker_cols = 5;
    double marker_radius = 3.0;
    double marker_ink_halfwidth = 0.45;

    double block_height = 1.0; // h_c
    double block_size_x = 30.0;
    double block_size_y = 30.0;

    double ball_radius = 2.0; // r_c
    int ball_count = 12;
    std::vector<Vec2> ball_positions; // artifact frame; empty selects the default grid

    int pin_count = 24;
    double pin_pitch = 4.0;
    double pin_radius = 1.2;
    double pin_height = 3.0;

    double flat_half_x = 130.0;
    double flat_half_y = 110.0;
};

std::vector<Vec2> default_ball_layout(const ArtifactSpec &spec);
std::vector<Vec2> default_pin_layout(const ArtifactSpec &spec);
void validate_artifact(const ArtifactSpec &spec);

enum class Criterion { Length, Flatness, Height, Sphericity };
constexpr std::array<Criterion, 4> kAllCriteria{Criterion::Length, Criterion::Flatness,
                                                Criterion::Height, Criterion::Sphericity};
const char *criterion_label(Criterion c); // E_d / E_p / E_h / E_s

struct ErrorSamples {
    Criterion criterion;
    std::vector<double> values; // mm; signed for length/sphericity, folded for flatness/height
};

// Range, population mean and population standard deviation.
struct SummaryStats {
    double range = 0.0;
    double mean = 0.0;
    double std = 0.0;
    size_t n = 0;
};

SummaryStats summarize(const ErrorSamples &samples);
SummaryStats summarize_values(std::span<const double> values);

// Cross-trial aggregate of the per-trial range/mean/std statistics.
struct MetricTuple {
    double mean_of_range = 0.0;
    double std_of_range = 0.0;
    double mean_of_mean = 0.0;
    double std_of_mean = 0.0;
    double mean_of_std = 0.0; // optional in reports
    double std_of_std = 0.0;  // optional in reports
    size_t trials = 0;
};

MetricTuple aggregate(const std::vector<SummaryStats> &trials);

struct BenchmarkReport {
    std::string device;
    size_t trials = 0;
    std::map<Criterion, MetricTuple> metrics; // absent key = criterion skipped
    std::map<Criterion, std::vector<SummaryStats>> per_trial; // audit trail
};

struct RenderedReport {
    std::string table;
    std::string csv;
};

// Four-row table (and CSV twin) in micrometres.
RenderedReport render_report(const BenchmarkReport &report);

// ---- Per-trial evaluations ------------------------------------------------

// E_d: adjacent marker spacing minus the certified pitch. Markers are
// detected in the texture image and measured in 3D through the grid.
ErrorSamples eval_length(const PointGrid &grid, const Image8 &texture,
                         const ArtifactSpec &spec, const Calibration &calib,
                         const HoughParams &hough = {});

// E_p: orthogonal distances to the flat fitted after masking markers.
ErrorSamples eval_flatness(const PointGrid &grid, const std::vector<Circle2> &circles,
                           const ArtifactSpec &spec, double radius_factor = 1.2);

// E_h: block-top distance to the flat's plane minus the certified height.
ErrorSamples eval_height(const PointGrid &grid, const std::vector<Circle2> &circles,
                         const ArtifactSpec &spec);

// E_s: fitted ball radius minus the certified radius, one sample per ball.
ErrorSamples eval_sphericity(const PointGrid &grid, const ArtifactSpec &spec);

// Max minus min signed distance from the points' own fitted plane.
struct CoplanarityResult {
    double range = 0.0; // mm
    Plane plane;
};
CoplanarityResult coplanarity_range(std::span<const Vec3> points);

// Robust flat estimate: iteratively refits on the points within band of
// the current plane, so raised objects do not bias the result. The plane
// is oriented with the camera origin on its positive side.
Plane fit_flat_robust(const PointGrid &grid, double band = 0.1, int iterations = 3);

// Per-pin tip centroids from a grid containing a pin array on a flat.
std::vector<Vec3> extract_pin_tips(const PointGrid &grid, size_t min_component_points = 20);

// Circle detection tuned from the artifact geometry (expected marker
// radius in pixels derived from the median grid depth).
std::vector<Circle2> detect_markers(const Image8 &texture, const PointGrid &grid,
                                    const ArtifactSpec &spec, const Calibration &calib,
                                    const HoughParams &hough = {});

} // namespace slmetro
