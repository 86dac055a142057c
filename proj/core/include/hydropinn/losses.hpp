/// @file losses.hpp
/// @brief Data-fidelity objectives: heteroscedastic Gaussian NLL, SoftDice on
/// a depth-derived soft water probability, the deterministic MSE baseline,
/// and the per-variant total-loss composition.

#pragma once

#include <string>

#include "hydropinn/field.hpp"
#include "hydropinn/physics.hpp"
#include "hydropinn/scene.hpp"

namespace hydropinn {

enum class Variant { baseline_mse, stabilized_mse, uncertainty_aware };

[[nodiscard]] std::string to_string(Variant v);
[[nodiscard]] Variant variant_from_string(const std::string& s);

struct LossWeights {
    double w_nll = 1.0;
    double w_dice = 1.0;
    Variant variant = Variant::uncertainty_aware;
    double tau_w = 0.05;    // water depth threshold, meters
    double temp = 0.02;     // soft threshold temperature, meters
    double dice_eps = 1.0;
};

void validate(const LossWeights& w);

struct NllResult {
    double scalar;      // mean over all cells
    Field2D per_cell;   // 0.5 * ((y - mu)^2 / sigma2 + ln sigma2)
};

/// Throws "variance must be positive" on any nonpositive sigma2 cell.
[[nodiscard]] NllResult gaussian_nll(const Field2D& y, const Field2D& mu,
                                     const Field2D& sigma2);

/// p = logistic((mu - tau_w)/temp), elementwise in (0,1).
[[nodiscard]] Field2D soft_water_prob(const Field2D& mu, const LossWeights& w);

/// 1 - (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps), y the 0/1 mask.
[[nodiscard]] double soft_dice_loss(const Field2D& p, const BitMask2D& y_mask,
                                    const LossWeights& w);

[[nodiscard]] double mse_loss(const Field2D& y, const Field2D& mu);

/// Every component of one training objective, recorded separately. The
/// physics components are always evaluated (gated when the variant gates),
/// even while the schedule holds their weight at zero, so loss histories show
/// the unweighted residual trajectory through the warm phase.
struct LossBundle {
    double data_loss = 0.0;    // MSE or NLL depending on variant
    double dice_loss = 0.0;    // evaluated for every variant, weighted only
                               // in uncertainty_aware
    double mass_loss = 0.0;
    double smooth_loss = 0.0;
    double physics_weight = 0.0;
    double total = 0.0;
};

/// Per-variant composition:
///   baseline_mse:      mse + lambda_max * physics (no schedule, no gate)
///   stabilized_mse:    mse + warmstart_weight(e) * physics (no gate)
///   uncertainty_aware: w_nll*NLL + w_dice*SoftDice
///                      + warmstart_weight(e) * gated physics
/// Physics residuals run on max(mu, 0) over the water mask eroded to
/// stencil-complete cells and restricted to the grid interior (predicted
/// mask instead when pcfg.use_predicted_mask).
[[nodiscard]] LossBundle total_loss(const Scene& scene, const Field2D& mu,
                                    const Field2D* sigma2, int epoch,
                                    const LossWeights& w,
                                    const PhysicsConfig& pcfg);

}  // namespace hydropinn
