#include "hydropinn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydropinn {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::baseline_mse: return "baseline_mse";
        case Variant::stabilized_mse: return "stabilized_mse";
        case Variant::uncertainty_aware: return "uncertainty_aware";
    }
    return "unknown";
}

Variant variant_from_string(const std::string& s) {
    if (s == "baseline_mse") return Variant::baseline_mse;
    if (s == "stabilized_mse") return Variant::stabilized_mse;
    if (s == "uncertainty_aware") return Variant::uncertainty_aware;
    throw std::invalid_argument("unknown loss variant '" + s + "'");
}

void validate(const LossWeights& w) {
    if (w.w_nll < 0.0 || w.w_dice < 0.0)
        throw std::invalid_argument("LossWeights: weights must be >= 0");
    if (!(w.tau_w > 0.0))
        throw std::invalid_argument("LossWeights: tau_w must be positive");
    if (!(w.temp > 0.0))
        throw std::invalid_argument("LossWeights: temp must be positive");
    if (!(w.dice_eps > 0.0))
        throw std::invalid_argument("LossWeights: dice_eps must be positive");
}

NllResult gaussian_nll(const Field2D& y, const Field2D& mu,
                       const Field2D& sigma2) {
    if (!y.same_shape(mu) || !y.same_shape(sigma2)) {
        throw std::invalid_argument("gaussian_nll: dimension mismatch");
    }
    NllResult out{0.0, Field2D(y.rows, y.cols, 0.0, y.spacing)};
    for (int k = 0; k < y.size(); ++k) {
        const double s2 = sigma2.v[k];
        if (!(s2 > 0.0)) {
            throw std::invalid_argument("variance must be positive");
        }
        const double r = y.v[k] - mu.v[k];
        out.per_cell.v[k] = 0.5 * (r * r / s2 + std::log(s2));
        out.scalar += out.per_cell.v[k];
    }
    out.scalar /= y.size();
    return out;
}

Field2D soft_water_prob(const Field2D& mu, const LossWeights& w) {
    Field2D p(mu.rows, mu.cols, 0.0, mu.spacing);
    for (int k = 0; k < mu.size(); ++k) {
        const double z = (mu.v[k] - w.tau_w) / w.temp;
        p.v[k] = 1.0 / (1.0 + std::exp(-z));
    }
    return p;
}

double soft_dice_loss(const Field2D& p, const BitMask2D& y_mask,
                      const LossWeights& w) {
    if (!y_mask.same_shape(p)) {
        throw std::invalid_argument("soft_dice_loss: dimension mismatch");
    }
    double inter = 0.0, psum = 0.0, ysum = 0.0;
    for (int k = 0; k < p.size(); ++k) {
        const double y = y_mask.bits[k] ? 1.0 : 0.0;
        inter += p.v[k] * y;
        psum += p.v[k];
        ysum += y;
    }
    return 1.0 - (2.0 * inter + w.dice_eps) / (psum + ysum + w.dice_eps);
}

double mse_loss(const Field2D& y, const Field2D& mu) {
    if (!y.same_shape(mu)) {
        throw std::invalid_argument("mse_loss: dimension mismatch");
    }
    double acc = 0.0;
    for (int k = 0; k < y.size(); ++k) {
        const double r = y.v[k] - mu.v[k];
        acc += r * r;
    }
    return acc / y.size();
}

LossBundle total_loss(const Scene& scene, const Field2D& mu,
                      const Field2D* sigma2, int epoch, const LossWeights& w,
                      const PhysicsConfig& pcfg) {
    if (w.variant == Variant::uncertainty_aware && sigma2 == nullptr) {
        throw std::invalid_argument(
            "total_loss: uncertainty_aware variant requires sigma2");
    }

    LossBundle out;
    out.physics_weight = w.variant == Variant::baseline_mse
                             ? pcfg.lambda_max
                             : warmstart_weight(epoch, pcfg);

    // Residual mask: ground-truth water by default, predicted water when
    // configured. Eroded to stencil-complete water (the mass term reads a
    // radius-2 neighbourhood) and restricted to the grid interior.
    BitMask2D resid_mask(mu.rows, mu.cols, false);
    if (pcfg.use_predicted_mask) {
        for (int k = 0; k < mu.size(); ++k) {
            resid_mask.bits[k] = mu.v[k] > w.tau_w ? 1 : 0;
        }
    } else {
        resid_mask = scene.water_mask;
    }
    resid_mask = interior_mask(erode4(resid_mask, 2));

    Field2D depth_phys(mu.rows, mu.cols, 0.0, mu.spacing);
    for (int k = 0; k < mu.size(); ++k) {
        depth_phys.v[k] = std::max(mu.v[k], 0.0);
    }
    PhysicsConfig pc = pcfg;
    pc.gating = w.variant == Variant::uncertainty_aware
                    ? Gating::inverse_variance
                    : Gating::none;
    PhysicsBreakdown pb = physics_loss(
        depth_phys, scene.dem, resid_mask,
        pc.gating == Gating::inverse_variance ? sigma2 : nullptr, pc);
    out.mass_loss = pb.mass_loss;
    out.smooth_loss = pb.smooth_loss;

    out.dice_loss = soft_dice_loss(soft_water_prob(mu, w), scene.water_mask, w);

    if (w.variant == Variant::uncertainty_aware) {
        out.data_loss = gaussian_nll(scene.depth_true, mu, *sigma2).scalar;
        out.total = w.w_nll * out.data_loss + w.w_dice * out.dice_loss +
                    out.physics_weight * (out.mass_loss + out.smooth_loss);
    } else {
        out.data_loss = mse_loss(scene.depth_true, mu);
        out.total = out.data_loss +
                    out.physics_weight * (out.mass_loss + out.smooth_loss);
    }
    return out;
}

}  // namespace hydropinn
