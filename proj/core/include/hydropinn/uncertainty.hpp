/// @file uncertainty.hpp
/// @brief Deep-ensemble orchestration, total-variance decomposition into
/// aleatoric and epistemic parts, and the binned variance-vs-error
/// calibration regression.

#pragma once

#include <vector>

#include "hydropinn/field.hpp"
#include "hydropinn/train.hpp"

namespace hydropinn {

struct EnsembleMember {
    Field2D mu;
    Field2D sigma2;
};

/// Per-scene predictions of every ensemble member.
struct EnsembleResult {
    std::vector<EnsembleMember> members;
};

struct Decomposition {
    Field2D aleatoric;  // mean of member variances
    Field2D epistemic;  // population variance of member means (divisor M)
    Field2D total;      // aleatoric + epistemic, exactly
    Field2D mu_star;    // ensemble mean
    double epistemic_ratio = 0.0;  // mean(epistemic) / mean(total)
};

struct CalibBin {
    double mean_sigma2 = 0.0;
    double mean_sq_err = 0.0;
    double sem = 0.0;  // stdev of squared errors / sqrt(n); 0 for n == 1
    long count = 0;
};

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double p_value = 1.0;
};

struct CalibrationReport {
    std::vector<CalibBin> bins;
    OlsFit fit;
    bool degenerate = false;  // constant predictor collapsed to one bin
};

struct EnsembleRun {
    std::vector<ModelParams> member_params;
    std::vector<TrainHistory> histories;
    std::vector<EnsembleResult> per_scene;  // aligned with val_scenes
};

/// Trains M models identical except for their seeds (model init and shuffle
/// seeds offset by the member index) and collects per-member predictions on
/// every validation scene.
[[nodiscard]] EnsembleRun run_ensemble(const std::vector<Scene>& train_scenes,
                                       const std::vector<Scene>& val_scenes,
                                       const ModelConfig& mcfg,
                                       const TrainConfig& tcfg,
                                       const PhysicsConfig& pcfg,
                                       const LossWeights& weights, int members);

/// Law-of-total-variance split; total = aleatoric + epistemic per cell.
[[nodiscard]] Decomposition decompose(const EnsembleResult& ens);

/// Pools all cells, forms `bins` equal-count bins by predicted variance
/// (stable cell order breaks ties), and reports per-bin means. A constant
/// predictor collapses to a single flagged bin. Throws when there are fewer
/// cells than bins.
[[nodiscard]] std::vector<CalibBin> calibration_bins(
    const std::vector<Field2D>& sigma2_pred,
    const std::vector<Field2D>& sq_error, int bins);

/// Closed-form least squares with a two-sided t-test on the slope
/// (regularized incomplete beta). Throws "zero variance in predictor" when x
/// is constant. A constant y gives slope 0, R^2 = 0, p = 1.
[[nodiscard]] OlsFit ols_fit(const std::vector<double>& x,
                             const std::vector<double>& y);

/// bins + regression over (mean_sigma2, mean_sq_err) per bin.
[[nodiscard]] CalibrationReport make_calibration_report(
    const std::vector<Field2D>& sigma2_pred,
    const std::vector<Field2D>& sq_error, int bins);

}  // namespace hydropinn
