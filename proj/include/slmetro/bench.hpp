#pragma once

#include <map>
#include <string>
#include <vector>

#include "slmetro/calibration.hpp"
#include "slmetro/metrics.hpp"
#include "slmetro/pattern_codec.hpp"
#include "slmetro/simulator.hpp"

namespace slmetro {

// One benchmark run: N trials, each trial re-posing the artifact within
// the working range and evaluating all four criteria on synthetic data.
struct RunConfig {
    std::string calibration_path; // empty selects the built-in device at `scale`
    DeviceScale scale = DeviceScale::Quarter;
    ArtifactSpec artifact;     // certified values used by the evaluations
    ArtifactSpec sim_artifact; // values the simulator builds; equal unless bias is injected
    CodecConfig codec;
    NoiseModel noise;
    PoseJitter jitter;
    WorkingRange range;
    HoughParams hough;
    int trials = 50;
    uint64_t seed = 1;
    int workers = 0;
};

RunConfig load_run_config(const std::string &path);
void save_run_config(const RunConfig &cfg, const std::string &path);

Calibration resolve_calibration(const RunConfig &cfg);

// Deterministic depth placement for a trial, always inside the working range.
double trial_depth_offset(const RunConfig &cfg, int trial);

struct TrialOutcome {
    int trial = 0;
    bool ok = false;
    std::string error;
    std::map<Criterion, SummaryStats> stats;
};

// Simulates the Flat/Block/Balls scenes for one trial and evaluates the
// four criteria. Evaluation failures are reported, not thrown.
TrialOutcome run_trial(const RunConfig &cfg, const Calibration &calib, int trial);

// Runs every trial and aggregates the per-trial statistics. Throws
// EmptyTrials when no trial succeeded. When audit is non-null it receives
// every per-trial outcome including failures.
BenchmarkReport run_benchmark(const RunConfig &cfg, const Calibration &calib,
                              std::vector<TrialOutcome> *audit = nullptr);

void save_report_json(const BenchmarkReport &report, const std::string &path);
BenchmarkReport load_report_json(const std::string &path);

// One JSON object per line, one line per trial.
void write_audit_jsonl(const std::vector<TrialOutcome> &audit, const std::string &path);

} // namespace slmetro
