/// @file commands.hpp
/// @brief Experiment recipes behind the hydropinn CLI. Each command resolves
/// its configuration, runs the experiment, persists artifacts (resolved
/// config echo, CSVs, grid files, checkpoints) under a fresh run directory,
/// and returns a summary for callers (the CLI and the acceptance suite).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hydropinn/config.hpp"
#include "hydropinn/uncertainty.hpp"

namespace hydropinn::cli {

/// Fresh timestamped subdirectory of cfg.output_dir; writes the resolved
/// config echo into it.
[[nodiscard]] std::string make_run_dir(const RunConfig& cfg,
                                       const std::string& command);

/// Standard synthetic suite: train seeds cfg.scene.rng_seed + i, validation
/// seeds offset by 1000000 (the geographic-split stand-in).
[[nodiscard]] std::pair<std::vector<Scene>, std::vector<Scene>> build_suite(
    const RunConfig& cfg);

struct SynthSummary {
    std::string run_dir;
    std::vector<std::string> scene_dirs;
};
SynthSummary cmd_synth(const RunConfig& cfg, bool quiet = false);

struct TrainSummary {
    std::string run_dir;
    MetricsRecord metrics;
    TrainHistory history;
    std::string history_csv;
    std::string checkpoint;
};
TrainSummary cmd_train(const RunConfig& cfg, bool quiet = false);

struct ShockSeedRow {
    std::uint64_t seed_offset = 0;
    double baseline_epoch0 = 0.0;   // recorded physics loss, first epoch
    double baseline_epoch5 = 0.0;
    double ratio = 0.0;             // epoch5 / epoch0
    bool shocked = false;           // ratio >= 3 (or divergence to non-finite)
    double warm_activation = 0.0;   // physics loss at e_warm
    double warm_late = 0.0;         // physics loss at e_warm + e_ramp + 5
    bool stabilized = false;        // warm_late <= warm_activation
};

struct ShockSummary {
    std::string run_dir;
    std::vector<ShockSeedRow> rows;
    int shocked_count = 0;
    int stabilized_count = 0;
    std::string verdict;
};

/// Two arms on identical scenes and seeds: baseline_mse with the physics
/// weight on from epoch 0, and the warm-start uncertainty_aware variant.
/// Runs e_warm + e_ramp + 6 epochs so the late comparison epoch exists.
ShockSummary cmd_shock(const RunConfig& cfg, bool quiet = false);

struct AblationRow {
    Variant variant;
    std::vector<double> per_seed_iou;
    double mean_iou = 0.0;
    double stdev_iou = 0.0;       // population
    double cov = 0.0;             // stdev / mean
    double rel_improvement = 0.0; // vs baseline_mse mean
};

struct AblationSummary {
    std::string run_dir;
    std::vector<AblationRow> rows;  // baseline, stabilized, uncertainty order
};
AblationSummary cmd_ablation(const RunConfig& cfg, bool quiet = false);

struct EnsembleSummary {
    std::string run_dir;
    std::vector<Decomposition> per_scene;
    double epistemic_ratio_pooled = 0.0;
    double aleatoric_truth_pearson = 0.0;
    double max_additivity_error = 0.0;
};
EnsembleSummary cmd_ensemble(const RunConfig& cfg, bool quiet = false);

struct CalibrateSummary {
    std::string run_dir;
    CalibrationReport model_report;
    CalibrationReport oracle_report;
};

/// Trains the uncertainty-aware model and regresses binned empirical squared
/// error on predicted variance; also runs the known-noise oracle predictor
/// (mu = truth + noise drawn at the true mapped variance) as a sanity arm.
CalibrateSummary cmd_calibrate(const RunConfig& cfg, bool quiet = false);

struct GradcheckSummary {
    struct Row {
        Variant variant;
        int checked = 0;
        double max_rel_error = 0.0;
    };
    std::string run_dir;
    std::vector<Row> rows;
    double tolerance = 1e-3;
    bool pass = false;
};

/// Reverse-mode vs central finite differences on a 16x16 scene with a tiny
/// model config, >= 50 sampled parameters per loss variant.
GradcheckSummary cmd_gradcheck(const RunConfig& cfg, bool quiet = false);

struct ReportSummary {
    std::string run_dir;
    int sources = 0;
};

/// Aggregates artifacts of earlier runs under cfg.output_dir into one
/// summary CSV per figure analog. Errors with "no runs found" when the
/// directory holds nothing aggregatable.
ReportSummary cmd_report(const RunConfig& cfg, bool quiet = false);

}  // namespace hydropinn::cli
