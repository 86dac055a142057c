/// @file train.hpp
/// @brief Optimization loop: AdamW with decoupled decay, cosine-annealing
/// warm-restart learning rates, early stopping on validation IoU, per-epoch
/// loss history, evaluation metrics, and checkpoint wrappers.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hydropinn/losses.hpp"
#include "hydropinn/model.hpp"
#include "hydropinn/physics.hpp"
#include "hydropinn/scene.hpp"

namespace hydropinn {

struct TrainConfig {
    double lr_max = 1e-3;
    double lr_min = 1e-6;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 70;
    int batch_size = 4;
    int t0 = 10;   // first cosine cycle length, epochs
    int t_mult = 2;
    int early_stop_patience = 15;
    std::uint64_t rng_seed = 7;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double data_loss = 0.0;
    double dice_loss = 0.0;
    double mass_loss = 0.0;
    double smooth_loss = 0.0;
    double physics_weight = 0.0;
    double total_loss = 0.0;
    double val_iou = 0.0;
    double val_rmse = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> rows;
};

struct MetricsRecord {
    double iou = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
};

struct AdamState {
    std::map<std::string, ad::Tensor> m;
    std::map<std::string, ad::Tensor> v;
    long step = 0;
};

/// Bias-corrected AdamW update with decoupled decay:
///   theta <- theta - lr * mhat/(sqrt(vhat)+eps) - lr * weight_decay * theta.
/// Entries missing from grads (non-trainable "norm.*" stats) are untouched.
/// Updated values are re-quantized to their float32 representation.
void adamw_step(ModelParams& params, const GradTable& grads, AdamState& state,
                double lr, const TrainConfig& cfg);

/// lr at progress t within a cycle of length cycle_len:
/// lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * t / cycle_len)).
[[nodiscard]] double cosine_warm_restart_lr(double t, double cycle_len,
                                            const TrainConfig& cfg);

/// Position of an epoch inside the warm-restart ladder T_i = t0 * t_mult^i:
/// returns (t, T_i).
[[nodiscard]] std::pair<double, double> cycle_position(int epoch,
                                                       const TrainConfig& cfg);

struct TrainResult {
    ModelParams params;      // parameters at the best validation IoU epoch
    TrainHistory history;
};

/// Deterministic given all seeds. Each epoch shuffles scene order with the
/// run RNG, averages gradients over scenes per batch (fanning scenes out to
/// workers, summing in fixed index order), applies AdamW at the scheduled
/// learning rate, runs validation, and records every loss component (physics
/// residuals are evaluated and recorded even while their weight is zero).
/// Stops early when validation IoU has not improved for
/// early_stop_patience epochs, and returns the best-IoU parameters.
[[nodiscard]] TrainResult train(const std::vector<Scene>& train_scenes,
                                const std::vector<Scene>& val_scenes,
                                const ModelConfig& mcfg, const TrainConfig& tcfg,
                                const PhysicsConfig& pcfg,
                                const LossWeights& weights);

/// Confusion-matrix metrics with the prediction binarized at mu > tau_w,
/// pooled over all cells of all scenes; RMSE/MAE over depth everywhere.
/// A zero denominator yields 1 when nothing is positive anywhere, else 0.
[[nodiscard]] MetricsRecord evaluate(const ModelParams& params,
                                     const std::vector<Scene>& scenes,
                                     const ModelConfig& mcfg,
                                     const LossWeights& weights);

/// CSV with header
/// epoch,data_loss,dice_loss,mass_loss,smooth_loss,physics_weight,total_loss,val_iou,val_rmse
void write_history_csv(const std::string& path, const TrainHistory& history);
[[nodiscard]] TrainHistory read_history_csv(const std::string& path);

}  // namespace hydropinn
