/// @file physics.hpp
/// @brief Shallow-water soft constraints: the Manning velocity proxy, mass
/// conservation and WSE smoothness residuals, optional inverse-variance
/// gating, and the warm-start weight schedule.
///
/// These are the evaluation-path implementations on plain fields. The
/// training graph mirrors them with differentiable ops; a property test pins
/// the two paths together to 1e-12.

#pragma once

#include "hydropinn/field.hpp"

namespace hydropinn {

enum class Gating { none, inverse_variance };

struct PhysicsConfig {
    double manning_n = 0.03;      // roughness
    int e_warm = 5;               // epochs with physics disabled
    int e_ramp = 10;              // epochs to ramp the weight to lambda_max
    double lambda_max = 1.0;
    Gating gating = Gating::none;
    double gate_epsilon = 1.0;
    double slope_floor = 1e-8;    // regularizes |grad WSE|^(1/2) at zero slope
    bool use_predicted_mask = false;  // gate residuals on the predicted mask
};

void validate(const PhysicsConfig& cfg);

struct PhysicsBreakdown {
    double mass_loss = 0.0;
    double smooth_loss = 0.0;
    double total = 0.0;  // mass_loss + smooth_loss exactly
};

struct VelocityPair {
    Field2D u;
    Field2D v;
};

/// Sheet-flow Manning closure: with S = grad_central(wse) and
/// a = |S| + slope_floor,
///   speed = (1/n) * depth^(2/3) * a^(1/2),  direction = -S / a.
/// Zero depth gives zero velocity. Throws on negative depth.
[[nodiscard]] VelocityPair manning_velocity(const Field2D& depth,
                                            const Field2D& wse,
                                            const PhysicsConfig& cfg);

/// masked_mean( divergence(depth*u, depth*v)^2 , mask ); 0 for an empty mask.
[[nodiscard]] double mass_conservation_loss(const Field2D& depth,
                                            const Field2D& u, const Field2D& v,
                                            const BitMask2D& mask);

/// With w = depth + dem: masked_mean( (dw/dx)^2 + (dw/dy)^2 , mask ).
[[nodiscard]] double wse_smoothness_loss(const Field2D& depth,
                                         const Field2D& dem,
                                         const BitMask2D& mask);

/// Both residuals of the velocity/flux chain above, optionally gated per cell
/// by gate_epsilon / (gate_epsilon + sigma2) before the masked means. The
/// mask is used as given; callers wanting the border excluded pass
/// interior_mask(...). Gating requires sigma2 (> 0 elementwise).
[[nodiscard]] PhysicsBreakdown physics_loss(const Field2D& depth,
                                            const Field2D& dem,
                                            const BitMask2D& mask,
                                            const Field2D* sigma2,
                                            const PhysicsConfig& cfg);

/// Piecewise warm-start weight: 0 before e_warm, then
/// lambda_max * min(1, (e - e_warm)/e_ramp).
[[nodiscard]] double warmstart_weight(int epoch, const PhysicsConfig& cfg);

}  // namespace hydropinn
