#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slmetro/bench.hpp"
#include "slmetro/io.hpp"
#include "slmetro/reconstruct.hpp"
#include "slmetro/rng.hpp"

namespace fs = std::filesystem;
using namespace slmetro;
using nlohmann::json;

namespace {

int log_level() {
    const char *env = std::getenv("SLMETRO_LOG");
    if (!env)
        return 1; // warnings and errors
    std::string v(env);
    if (v == "quiet" || v == "error")
        return 0;
    if (v == "warn")
        return 1;
    if (v == "info")
        return 2;
    return 3; // debug
}

void log_warn(const std::string &msg) {
    if (log_level() >= 1)
        std::cerr << "warning: " << msg << "\n";
}

void log_info(const std::string &msg) {
    if (log_level() >= 2)
        std::cerr << "info: " << msg << "\n";
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    int trials = -1;
    long long seed = -1;
    int workers = -1;
    std::string scale;
};

RunConfig effective_config(const CommonOpts &opt) {
    RunConfig cfg;
    if (!opt.config_path.empty())
        cfg = load_run_config(opt.config_path);
    if (opt.trials >= 1)
        cfg.trials = opt.trials;
    if (opt.seed >= 0)
        cfg.seed = static_cast<uint64_t>(opt.seed);
    if (opt.workers >= 0)
        cfg.workers = opt.workers;
    if (opt.scale == "full")
        cfg.scale = DeviceScale::Full;
    else if (opt.scale == "quarter")
        cfg.scale = DeviceScale::Quarter;
    else if (!opt.scale.empty())
        throw InvalidConfig("scale must be 'full' or 'quarter'");
    return cfg;
}

std::string trial_dir_name(int trial) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trial_%03d", trial);
    return buf;
}

const char *scene_dir_name(SceneKind kind) {
    switch (kind) {
    case SceneKind::Flat:
        return "flat";
    case SceneKind::Block:
        return "block";
    case SceneKind::Balls:
        return "balls";
    case SceneKind::Pins:
        return "pins";
    }
    return "scene";
}

int cmd_patterns(const CommonOpts &opt) {
    RunConfig cfg = effective_config(opt);
    PatternStack patterns = generate_patterns(cfg.codec);
    fs::create_directories(opt.out_dir);
    std::vector<std::string> files;
    for (size_t i = 0; i < patterns.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%02zu.pgm", i);
        write_pgm(patterns.frames[i], opt.out_dir + "/" + name);
        files.push_back(name);
    }
    write_stack_manifest(opt.out_dir, cfg.codec, patterns.meta, files);
    std::cout << "wrote " << files.size() << " pattern frames to " << opt.out_dir << "\n";
    return 0;
}

int cmd_simulate(const CommonOpts &opt) {
    RunConfig cfg = effective_config(opt);
    Calibration calib = resolve_calibration(cfg);
    PatternStack patterns = generate_patterns(cfg.codec);
    fs::create_directories(opt.out_dir);

    json manifest;
    manifest["trials"] = cfg.trials;
    manifest["seed"] = cfg.seed;
    json trial_list = json::array();

    constexpr SceneKind kinds[] = {SceneKind::Flat, SceneKind::Block, SceneKind::Balls};
    constexpr uint64_t salts[] = {1, 11, 21};
    for (int t = 0; t < cfg.trials; ++t) {
        double offset = trial_depth_offset(cfg, t);
        uint64_t trial_seed = hash_counter(cfg.seed, 100, static_cast<uint64_t>(t));
        std::string tdir = opt.out_dir + "/" + trial_dir_name(t);
        json trial_entry;
        trial_entry["trial"] = t;
        trial_entry["depth_offset"] = offset;
        json scene_list = json::array();
        for (int k = 0; k < 3; ++k) {
            Scene scene = build_scene(cfg.sim_artifact, cfg.range, offset, cfg.jitter, kinds[k],
                                      mix64(trial_seed ^ salts[k]));
            NoiseModel noise = cfg.noise;
            noise.seed = mix64(trial_seed ^ (salts[k] + 1));
            std::string sdir = tdir + "/" + scene_dir_name(kinds[k]);
            fs::create_directories(sdir);

            RenderedStack rendered = render_stack(scene, calib, patterns, noise);
            std::vector<std::string> files;
            for (size_t i = 0; i < rendered.stack.frames.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%02zu.pgm", i);
                write_pgm(rendered.stack.frames[i], sdir + "/" + name);
                files.push_back(name);
            }
            write_stack_manifest(sdir, cfg.codec, rendered.stack.meta, files);
            write_pgm(rendered.texture, sdir + "/texture.pgm");

            PointGrid truth = synthesize_grid(scene, calib, noise);
            if (noise.smoothing_kernel >= 3)
                truth = smooth_grid(truth, noise.smoothing_kernel);
            write_grid_ply(truth, sdir + "/truth.ply");

            json scene_entry;
            scene_entry["kind"] = scene_dir_name(kinds[k]);
            scene_entry["dir"] = trial_dir_name(t) + "/" + scene_dir_name(kinds[k]);
            scene_entry["frames"] = files;
            scene_entry["texture"] = "texture.pgm";
            scene_entry["truth"] = "truth.ply";
            scene_list.push_back(scene_entry);
            log_info("simulated " + sdir);
        }
        trial_entry["scenes"] = scene_list;
        trial_list.push_back(trial_entry);
    }
    manifest["trial_dirs"] = trial_list;
    std::ofstream mout(opt.out_dir + "/run_manifest.json");
    if (!mout)
        throw IoError("cannot write run manifest in " + opt.out_dir);
    mout << manifest.dump(2) << "\n";
    std::cout << "simulated " << cfg.trials << " trials into " << opt.out_dir << "\n";
    return 0;
}

int cmd_reconstruct(const std::string &input, const std::string &calib_path,
                    const CommonOpts &opt, const std::string &out_file) {
    RunConfig cfg = effective_config(opt);
    if (!calib_path.empty())
        cfg.calibration_path = calib_path;
    Calibration calib = resolve_calibration(cfg);

    PointGrid grid;
    if (fs::is_directory(input)) {
        CodecConfig codec;
        CaptureStack stack = load_capture_stack(input, &codec);
        CorrespondenceMap map = decode(stack, codec);
        grid = reconstruct_grid(map, calib, cfg.workers);
    } else if (calib.laser_mode()) {
        grid = reconstruct_laser(read_pgm(input), calib);
    } else {
        throw InvalidConfig("single-image input requires laser-plane calibration");
    }
    std::string out = out_file.empty()
                          ? (fs::is_directory(input) ? input + "/grid.ply" : "grid.ply")
                          : out_file;
    write_grid_ply(grid, out);
    std::cout << "reconstructed " << grid.count_valid() << " points -> " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string &run_dir, const CommonOpts &opt) {
    RunConfig cfg = effective_config(opt);
    Calibration calib = resolve_calibration(cfg);

    std::vector<std::string> trial_dirs;
    if (fs::is_directory(run_dir)) {
        for (const auto &entry : fs::directory_iterator(run_dir))
            if (entry.is_directory() && entry.path().filename().string().rfind("trial_", 0) == 0)
                trial_dirs.push_back(entry.path().string());
    }
    std::sort(trial_dirs.begin(), trial_dirs.end());
    if (trial_dirs.empty()) {
        std::cerr << "error: no trial directories under " << run_dir << "\n";
        return 2;
    }

    auto load_grid = [](const std::string &scene_dir) {
        std::string reconstructed = scene_dir + "/grid.ply";
        if (fs::exists(reconstructed))
            return read_grid_ply(reconstructed);
        return read_grid_ply(scene_dir + "/truth.ply");
    };

    std::vector<TrialOutcome> audit;
    std::map<Criterion, std::vector<SummaryStats>> per_trial;
    for (size_t t = 0; t < trial_dirs.size(); ++t) {
        TrialOutcome outcome;
        outcome.trial = static_cast<int>(t);
        try {
            PointGrid flat = load_grid(trial_dirs[t] + "/flat");
            Image8 texture = read_pgm(trial_dirs[t] + "/flat/texture.pgm");
            outcome.stats[Criterion::Length] =
                summarize(eval_length(flat, texture, cfg.artifact, calib, cfg.hough));
            std::vector<Circle2> circles =
                detect_markers(texture, flat, cfg.artifact, calib, cfg.hough);
            outcome.stats[Criterion::Flatness] =
                summarize(eval_flatness(flat, circles, cfg.artifact));
            outcome.stats[Criterion::Height] =
                summarize(eval_height(load_grid(trial_dirs[t] + "/block"), {}, cfg.artifact));
            outcome.stats[Criterion::Sphericity] =
                summarize(eval_sphericity(load_grid(trial_dirs[t] + "/balls"), cfg.artifact));
            outcome.ok = true;
            for (const auto &[criterion, stats] : outcome.stats)
                per_trial[criterion].push_back(stats);
        } catch (const Error &e) {
            outcome.ok = false;
            outcome.error = e.what();
            outcome.stats.clear();
            log_warn("trial " + trial_dirs[t] + " excluded: " + e.what());
        }
        audit.push_back(std::move(outcome));
    }

    fs::create_directories(opt.out_dir);
    write_audit_jsonl(audit, opt.out_dir + "/audit.jsonl");
    if (per_trial.empty()) {
        std::cerr << "error: every trial failed; see " << opt.out_dir << "/audit.jsonl\n";
        return 2;
    }

    BenchmarkReport report;
    report.device = cfg.calibration_path.empty()
                        ? (cfg.scale == DeviceScale::Full ? "builtin-full" : "builtin-quarter")
                        : cfg.calibration_path;
    report.trials = trial_dirs.size();
    for (const auto &[criterion, stats] : per_trial) {
        report.metrics[criterion] = aggregate(stats);
        report.per_trial[criterion] = stats;
    }
    save_report_json(report, opt.out_dir + "/report.json");
    RenderedReport rendered = render_report(report);
    std::ofstream(opt.out_dir + "/report.txt") << rendered.table;
    std::ofstream(opt.out_dir + "/report.csv") << rendered.csv;
    std::cout << rendered.table;
    return 0;
}

int cmd_coplanarity(const std::string &input, double tolerance_um) {
    std::vector<Vec3> points;
    if (ply_is_grid(input)) {
        PointGrid grid = read_grid_ply(input);
        points = extract_pin_tips(grid);
    } else {
        points = read_points_ply(input);
    }
    CoplanarityResult result = coplanarity_range(points);
    double range_um = result.range * 1000.0;
    bool pass = range_um < tolerance_um;
    std::printf("points: %zu\nrange: %.3f um\ntolerance: %.3f um\nverdict: %s\n", points.size(),
                range_um, tolerance_um, pass ? "PASS" : "FAIL");
    return pass ? 0 : 1;
}

int cmd_report(const std::string &report_path, const std::string &csv_out) {
    BenchmarkReport report = load_report_json(report_path);
    RenderedReport rendered = render_report(report);
    std::cout << rendered.table;
    if (!csv_out.empty())
        std::ofstream(csv_out) << rendered.csv;
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Structured-light metrology benchmark toolkit"};
    app.require_subcommand(1);

    CommonOpts opt;
    std::string input, calib_path, out_file, csv_out;
    double tolerance_um = 10.0;

    auto add_common = [&](CLI::App *sub, bool with_out = true) {
        sub->add_option("--config", opt.config_path, "run configuration JSON");
        sub->add_option("--trials", opt.trials, "override trial count");
        sub->add_option("--seed", opt.seed, "override RNG seed");
        sub->add_option("--workers", opt.workers, "worker thread count (0 = hardware)");
        sub->add_option("--scale", opt.scale, "built-in device scale: full or quarter");
        if (with_out)
            sub->add_option("--out", opt.out_dir, "output directory");
    };

    CLI::App *patterns = app.add_subcommand("patterns", "write projector pattern frames");
    add_common(patterns);

    CLI::App *simulate = app.add_subcommand("simulate", "render synthetic trial captures");
    add_common(simulate);

    CLI::App *reconstruct =
        app.add_subcommand("reconstruct", "decode a capture stack into a point grid");
    reconstruct->add_option("input", input, "stack directory or laser-line image")->required();
    reconstruct->add_option("--calibration", calib_path, "calibration JSON");
    reconstruct->add_option("--out", out_file, "output PLY path");
    add_common(reconstruct, false);

    CLI::App *evaluate = app.add_subcommand("evaluate", "run the four-criterion benchmark");
    evaluate->add_option("run_dir", input, "directory of simulated/reconstructed trials")
        ->required();
    add_common(evaluate);

    CLI::App *coplanarity =
        app.add_subcommand("coplanarity", "pin-tip coplanarity check on a PLY file");
    coplanarity->add_option("input", input, "grid or point PLY")->required();
    coplanarity->add_option("--tolerance-um", tolerance_um, "pass threshold in micrometres");

    CLI::App *report = app.add_subcommand("report", "render a saved report JSON");
    report->add_option("report_json", input, "report JSON path")->required();
    report->add_option("--csv", csv_out, "also write the CSV twin");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(patterns))
            return cmd_patterns(opt);
        if (app.got_subcommand(simulate))
            return cmd_simulate(opt);
        if (app.got_subcommand(reconstruct))
            return cmd_reconstruct(input, calib_path, opt, out_file);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(input, opt);
        if (app.got_subcommand(coplanarity))
            return cmd_coplanarity(input, tolerance_um);
        if (app.got_subcommand(report))
            return cmd_report(input, csv_out);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
