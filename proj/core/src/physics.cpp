#include "hydropinn/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydropinn {

void validate(const PhysicsConfig& cfg) {
    if (!(cfg.manning_n > 0.0))
        throw std::invalid_argument("PhysicsConfig: manning_n must be positive");
    if (cfg.e_warm < 0)
        throw std::invalid_argument("PhysicsConfig: e_warm must be >= 0");
    if (cfg.e_ramp < 1)
        throw std::invalid_argument("PhysicsConfig: e_ramp must be >= 1");
    if (cfg.lambda_max < 0.0)
        throw std::invalid_argument("PhysicsConfig: lambda_max must be >= 0");
    if (!(cfg.gate_epsilon > 0.0))
        throw std::invalid_argument("PhysicsConfig: gate_epsilon must be positive");
    if (!(cfg.slope_floor > 0.0))
        throw std::invalid_argument("PhysicsConfig: slope_floor must be positive");
}

VelocityPair manning_velocity(const Field2D& depth, const Field2D& wse,
                              const PhysicsConfig& cfg) {
    if (!depth.same_shape(wse)) {
        throw std::invalid_argument("manning_velocity: dimension mismatch");
    }
    for (double d : depth.v) {
        if (d < 0.0) throw std::invalid_argument("depth must be nonnegative");
    }
    GradPair s = grad_central(wse);
    VelocityPair out{Field2D(depth.rows, depth.cols, 0.0, depth.spacing),
                     Field2D(depth.rows, depth.cols, 0.0, depth.spacing)};
    const double inv_n = 1.0 / cfg.manning_n;
    for (int k = 0; k < depth.size(); ++k) {
        const double sx = s.dx.v[k];
        const double sy = s.dy.v[k];
        const double a = std::hypot(sx, sy) + cfg.slope_floor;
        const double speed =
            inv_n * std::pow(depth.v[k], 2.0 / 3.0) * std::sqrt(a);
        out.u.v[k] = speed * (-sx / a);
        out.v.v[k] = speed * (-sy / a);
    }
    return out;
}

double mass_conservation_loss(const Field2D& depth, const Field2D& u,
                              const Field2D& v, const BitMask2D& mask) {
    if (!depth.same_shape(u) || !depth.same_shape(v) || !mask.same_shape(depth)) {
        throw std::invalid_argument("mass_conservation_loss: dimension mismatch");
    }
    Field2D fx(depth.rows, depth.cols, 0.0, depth.spacing);
    Field2D fy(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < depth.size(); ++k) {
        fx.v[k] = depth.v[k] * u.v[k];
        fy.v[k] = depth.v[k] * v.v[k];
    }
    Field2D div = divergence(fx, fy);
    for (auto& x : div.v) x *= x;
    return masked_mean(div, mask);
}

double wse_smoothness_loss(const Field2D& depth, const Field2D& dem,
                           const BitMask2D& mask) {
    if (!depth.same_shape(dem) || !mask.same_shape(depth)) {
        throw std::invalid_argument("wse_smoothness_loss: dimension mismatch");
    }
    Field2D w(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < w.size(); ++k) w.v[k] = depth.v[k] + dem.v[k];
    GradPair g = grad_central(w);
    Field2D sq(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < sq.size(); ++k) {
        sq.v[k] = g.dx.v[k] * g.dx.v[k] + g.dy.v[k] * g.dy.v[k];
    }
    return masked_mean(sq, mask);
}

PhysicsBreakdown physics_loss(const Field2D& depth, const Field2D& dem,
                              const BitMask2D& mask, const Field2D* sigma2,
                              const PhysicsConfig& cfg) {
    if (cfg.gating == Gating::inverse_variance) {
        if (sigma2 == nullptr) {
            throw std::invalid_argument(
                "physics_loss: inverse_variance gating requires sigma2");
        }
        if (!sigma2->same_shape(depth)) {
            throw std::invalid_argument("physics_loss: sigma2 dimension mismatch");
        }
        for (double s : sigma2->v) {
            if (!(s > 0.0)) {
                throw std::invalid_argument(
                    "physics_loss: sigma2 must be positive");
            }
        }
    }

    Field2D wse(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < wse.size(); ++k) wse.v[k] = depth.v[k] + dem.v[k];

    VelocityPair vel = manning_velocity(depth, wse, cfg);
    Field2D fx(depth.rows, depth.cols, 0.0, depth.spacing);
    Field2D fy(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < depth.size(); ++k) {
        fx.v[k] = depth.v[k] * vel.u.v[k];
        fy.v[k] = depth.v[k] * vel.v.v[k];
    }
    Field2D mass_sq = divergence(fx, fy);
    for (auto& x : mass_sq.v) x *= x;

    GradPair g = grad_central(wse);
    Field2D smooth_sq(depth.rows, depth.cols, 0.0, depth.spacing);
    for (int k = 0; k < smooth_sq.size(); ++k) {
        smooth_sq.v[k] = g.dx.v[k] * g.dx.v[k] + g.dy.v[k] * g.dy.v[k];
    }

    if (cfg.gating == Gating::inverse_variance) {
        for (int k = 0; k < depth.size(); ++k) {
            const double gate =
                cfg.gate_epsilon / (cfg.gate_epsilon + sigma2->v[k]);
            mass_sq.v[k] *= gate;
            smooth_sq.v[k] *= gate;
        }
    }

    PhysicsBreakdown out;
    out.mass_loss = masked_mean(mass_sq, mask);
    out.smooth_loss = masked_mean(smooth_sq, mask);
    out.total = out.mass_loss + out.smooth_loss;
    return out;
}

double warmstart_weight(int epoch, const PhysicsConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("warmstart_weight: epoch < 0");
    if (epoch < cfg.e_warm) return 0.0;
    const double ramp =
        static_cast<double>(epoch - cfg.e_warm) / static_cast<double>(cfg.e_ramp);
    return cfg.lambda_max * std::min(1.0, ramp);
}

}  // namespace hydropinn
