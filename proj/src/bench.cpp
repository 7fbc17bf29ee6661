#include "slmetro/bench.hpp"

#include <fstream>

#include <json.hpp>

#include "slmetro/rng.hpp"

namespace slmetro {

namespace {

using nlohmann::json;

// RNG stream ids for the per-trial derivations.
constexpr uint64_t kStreamTrialSeed = 100;
constexpr uint64_t kStreamDepth = 101;

ArtifactSpec artifact_from_json(const json &j, ArtifactSpec base) {
    base.marker_pitch = j.value("marker_pitch", base.marker_pitch);
    base.marker_rows = j.value("marker_rows", base.marker_rows);
    base.marker_cols = j.value("marker_cols", base.marker_cols);
    base.marker_radius = j.value("marker_radius", base.marker_radius);
    base.marker_ink_halfwidth = j.value("marker_ink_halfwidth", base.marker_ink_halfwidth);
    base.block_height = j.value("block_height", base.block_height);
    base.block_size_x = j.value("block_size_x", base.block_size_x);
    base.block_size_y = j.value("block_size_y", base.block_size_y);
    base.ball_radius = j.value("ball_radius", base.ball_radius);
    base.ball_count = j.value("ball_count", base.ball_count);
    base.pin_count = j.value("pin_count", base.pin_count);
    base.pin_pitch = j.value("pin_pitch", base.pin_pitch);
    base.pin_radius = j.value("pin_radius", base.pin_radius);
    base.pin_height = j.value("pin_height", base.pin_height);
    base.flat_half_x = j.value("flat_half_x", base.flat_half_x);
    base.flat_half_y = j.value("flat_half_y", base.flat_half_y);
    return base;
}

json artifact_to_json(const ArtifactSpec &a) {
    return {{"marker_pitch", a.marker_pitch},
            {"marker_rows", a.marker_rows},
            {"marker_cols", a.marker_cols},
            {"marker_radius", a.marker_radius},
            {"marker_ink_halfwidth", a.marker_ink_halfwidth},
            {"block_height", a.block_height},
            {"block_size_x", a.block_size_x},
            {"block_size_y", a.block_size_y},
            {"ball_radius", a.ball_radius},
            {"ball_count", a.ball_count},
            {"pin_count", a.pin_count},
            {"pin_pitch", a.pin_pitch},
            {"pin_radius", a.pin_radius},
            {"pin_height", a.pin_height},
            {"flat_half_x", a.flat_half_x},
            {"flat_half_y", a.flat_half_y}};
}

Criterion criterion_from_label(const std::string &label) {
    for (Criterion c : kAllCriteria)
        if (label == criterion_label(c))
            return c;
    throw IoError("unknown criterion label: " + label);
}

} // namespace

RunConfig load_run_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open run config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw IoError("run config parse error: " + std::string(e.what()));
    }
    RunConfig cfg;
    cfg.calibration_path = j.value("calibration", std::string());
    std::string scale = j.value("scale", std::string("quarter"));
    if (scale == "full")
        cfg.scale = DeviceScale::Full;
    else if (scale == "quarter")
        cfg.scale = DeviceScale::Quarter;
    else
        throw InvalidConfig("scale must be 'full' or 'quarter'");
    if (j.contains("artifact"))
        cfg.artifact = artifact_from_json(j["artifact"], cfg.artifact);
    cfg.sim_artifact =
        j.contains("sim_artifact") ? artifact_from_json(j["sim_artifact"], cfg.artifact)
                                   : cfg.artifact;
    if (j.contains("codec")) {
        const json &c = j["codec"];
        cfg.codec.proj_width = c.value("proj_width", cfg.codec.proj_width);
        cfg.codec.proj_height = c.value("proj_height", cfg.codec.proj_height);
        cfg.codec.stripe_period = c.value("stripe_period", cfg.codec.stripe_period);
        cfg.codec.n_shifts = c.value("n_shifts", cfg.codec.n_shifts);
        cfg.codec.contrast_threshold =
            c.value("contrast_threshold", cfg.codec.contrast_threshold);
        cfg.codec.min_amplitude = c.value("min_amplitude", cfg.codec.min_amplitude);
    }
    if (j.contains("noise")) {
        const json &n = j["noise"];
        cfg.noise.sigma_z = n.value("sigma_z", cfg.noise.sigma_z);
        cfg.noise.sigma_i = n.value("sigma_i", cfg.noise.sigma_i);
        cfg.noise.outlier_rate = n.value("outlier_rate", cfg.noise.outlier_rate);
        cfg.noise.smoothing_kernel = n.value("smoothing_kernel", cfg.noise.smoothing_kernel);
    }
    if (j.contains("jitter")) {
        const json &p = j["jitter"];
        cfg.jitter.max_rot_deg = p.value("max_rot_deg", cfg.jitter.max_rot_deg);
        cfg.jitter.max_shift = p.value("max_shift", cfg.jitter.max_shift);
    }
    if (j.contains("working_range")) {
        const json &r = j["working_range"];
        cfg.range.reference_depth = r.value("reference_depth", cfg.range.reference_depth);
        cfg.range.half_range = r.value("half_range", cfg.range.half_range);
    }
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    if (cfg.trials < 1)
        throw InvalidConfig("trials must be at least 1");
    return cfg;
}

void save_run_config(const RunConfig &cfg, const std::string &path) {
    json j;
    if (!cfg.calibration_path.empty())
        j["calibration"] = cfg.calibration_path;
    j["scale"] = cfg.scale == DeviceScale::Full ? "full" : "quarter";
    j["artifact"] = artifact_to_json(cfg.artifact);
    j["sim_artifact"] = artifact_to_json(cfg.sim_artifact);
    j["codec"] = {{"proj_width", cfg.codec.proj_width},
                  {"proj_height", cfg.codec.proj_height},
                  {"stripe_period", cfg.codec.stripe_period},
                  {"n_shifts", cfg.codec.n_shifts},
                  {"contrast_threshold", cfg.codec.contrast_threshold},
                  {"min_amplitude", cfg.codec.min_amplitude}};
    j["noise"] = {{"sigma_z", cfg.noise.sigma_z},
                  {"sigma_i", cfg.noise.sigma_i},
                  {"outlier_rate", cfg.noise.outlier_rate},
                  {"smoothing_kernel", cfg.noise.smoothing_kernel}};
    j["jitter"] = {{"max_rot_deg", cfg.jitter.max_rot_deg},
                   {"max_shift", cfg.jitter.max_shift}};
    j["working_range"] = {{"reference_depth", cfg.range.reference_depth},
                          {"half_range", cfg.range.half_range}};
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write run config: " + path);
    out << j.dump(2) << "\n";
}

Calibration resolve_calibration(const RunConfig &cfg) {
    if (!cfg.calibration_path.empty())
        return load_calibration(cfg.calibration_path);
    return default_calibration(cfg.scale);
}

double trial_depth_offset(const RunConfig &cfg, int trial) {
    double u = uniform(cfg.seed, kStreamDepth, static_cast<uint64_t>(trial));
    return cfg.range.half_range * (2.0 * u - 1.0);
}

TrialOutcome run_trial(const RunConfig &cfg, const Calibration &calib, int trial) {
    TrialOutcome out;
    out.trial = trial;
    double offset = trial_depth_offset(cfg, trial);
    uint64_t trial_seed = hash_counter(cfg.seed, kStreamTrialSeed, static_cast<uint64_t>(trial));

    auto grid_for = [&](SceneKind kind, uint64_t salt) {
        Scene scene = build_scene(cfg.sim_artifact, cfg.range, offset, cfg.jitter, kind,
                                  mix64(trial_seed ^ salt));
        NoiseModel noise = cfg.noise;
        noise.seed = mix64(trial_seed ^ (salt + 1));
        PointGrid grid = synthesize_grid(scene, calib, noise);
        if (noise.smoothing_kernel >= 3)
            grid = smooth_grid(grid, noise.smoothing_kernel);
        return std::pair<Scene, PointGrid>(std::move(scene), std::move(grid));
    };

    try {
        auto [flat_scene, flat_grid] = grid_for(SceneKind::Flat, 1);
        NoiseModel tex_noise = cfg.noise;
        tex_noise.seed = mix64(trial_seed ^ 3);
        Image8 texture = render_texture(flat_scene, calib, tex_noise);

        out.stats[Criterion::Length] =
            summarize(eval_length(flat_grid, texture, cfg.artifact, calib, cfg.hough));
        std::vector<Circle2> circles =
            detect_markers(texture, flat_grid, cfg.artifact, calib, cfg.hough);
        out.stats[Criterion::Flatness] =
            summarize(eval_flatness(flat_grid, circles, cfg.artifact));

        auto [block_scene, block_grid] = grid_for(SceneKind::Block, 11);
        out.stats[Criterion::Height] =
            summarize(eval_height(block_grid, {}, cfg.artifact));

        auto [balls_scene, balls_grid] = grid_for(SceneKind::Balls, 21);
        out.stats[Criterion::Sphericity] =
            summarize(eval_sphericity(balls_grid, cfg.artifact));

        out.ok = true;
    } catch (const Error &e) {
        out.ok = false;
        out.error = e.what();
        out.stats.clear();
    }
    return out;
}

BenchmarkReport run_benchmark(const RunConfig &cfg, const Calibration &calib,
                              std::vector<TrialOutcome> *audit) {
    std::map<Criterion, std::vector<SummaryStats>> per_trial;
    for (int t = 0; t < cfg.trials; ++t) {
        TrialOutcome outcome = run_trial(cfg, calib, t);
        if (outcome.ok)
            for (const auto &[criterion, stats] : outcome.stats)
                per_trial[criterion].push_back(stats);
        if (audit)
            audit->push_back(std::move(outcome));
    }
    if (per_trial.empty())
        throw EmptyTrials("every trial failed");

    BenchmarkReport report;
    report.device = cfg.calibration_path.empty()
                        ? (cfg.scale == DeviceScale::Full ? "builtin-full" : "builtin-quarter")
                        : cfg.calibration_path;
    report.trials = static_cast<size_t>(cfg.trials);
    for (const auto &[criterion, stats] : per_trial) {
        report.metrics[criterion] = aggregate(stats);
        report.per_trial[criterion] = stats;
    }
    return report;
}

void save_report_json(const BenchmarkReport &report, const std::string &path) {
    json j;
    j["device"] = report.device;
    j["trials"] = report.trials;
    json metrics = json::object();
    for (const auto &[criterion, m] : report.metrics) {
        metrics[criterion_label(criterion)] = {
            {"mean_of_range", m.mean_of_range}, {"std_of_range", m.std_of_range},
            {"mean_of_mean", m.mean_of_mean},   {"std_of_mean", m.std_of_mean},
            {"mean_of_std", m.mean_of_std},     {"std_of_std", m.std_of_std},
            {"trials", m.trials}};
    }
    j["metrics"] = metrics;
    json per_trial = json::object();
    for (const auto &[criterion, stats] : report.per_trial) {
        json arr = json::array();
        for (const SummaryStats &s : stats)
            arr.push_back({{"range", s.range}, {"mean", s.mean}, {"std", s.std}, {"n", s.n}});
        per_trial[criterion_label(criterion)] = arr;
    }
    j["per_trial"] = per_trial;
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

BenchmarkReport load_report_json(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open report: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw IoError("report parse error: " + std::string(e.what()));
    }
    BenchmarkReport report;
    report.device = j.value("device", std::string());
    report.trials = j.value("trials", size_t{0});
    for (const auto &[label, m] : j.at("metrics").items()) {
        Criterion c = criterion_from_label(label);
        MetricTuple t;
        t.mean_of_range = m.at("mean_of_range").get<double>();
        t.std_of_range = m.at("std_of_range").get<double>();
        t.mean_of_mean = m.at("mean_of_mean").get<double>();
        t.std_of_mean = m.at("std_of_mean").get<double>();
        t.mean_of_std = m.value("mean_of_std", 0.0);
        t.std_of_std = m.value("std_of_std", 0.0);
        t.trials = m.value("trials", size_t{0});
        report.metrics[c] = t;
    }
    if (j.contains("per_trial")) {
        for (const auto &[label, arr] : j["per_trial"].items()) {
            Criterion c = criterion_from_label(label);
            for (const json &s : arr) {
                SummaryStats st;
                st.range = s.at("range").get<double>();
                st.mean = s.at("mean").get<double>();
                st.std = s.at("std").get<double>();
                st.n = s.value("n", size_t{0});
                report.per_trial[c].push_back(st);
            }
        }
    }
    return report;
}

void write_audit_jsonl(const std::vector<TrialOutcome> &audit, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write audit log: " + path);
    for (const TrialOutcome &t : audit) {
        json j;
        j["trial"] = t.trial;
        j["ok"] = t.ok;
        if (!t.ok)
            j["error"] = t.error;
        json stats = json::object();
        for (const auto &[criterion, s] : t.stats)
            stats[criterion_label(criterion)] = {
                {"range", s.range}, {"mean", s.mean}, {"std", s.std}, {"n", s.n}};
        j["stats"] = stats;
        out << j.dump() << "\n";
    }
}

} // namespace slmetro
