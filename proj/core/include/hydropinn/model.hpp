/// @file model.hpp
/// @brief The Attention-Gated FNO-UNet with probabilistic head.
///
/// Architecture (width C, L = depth_levels):
///   - inputs standardized per channel with stats stored as "norm.*" entries
///     of the parameter table (non-trainable, persisted in checkpoints),
///   - encoder: 3x3 stem at full resolution, then L-1 stride-2 conv levels,
///   - bottleneck: two spectral-convolution layers, each with a pointwise
///     linear bypass, at resolution H / 2^(L-1),
///   - decoder: nearest-neighbour upsample + conv per level, with
///     attention-gated skip connections fused by concat + conv,
///   - heads: linear mu (depth, meters); softplus sigma^2 plus sigma_floor.
///
/// Parameters live in a name-keyed table. Every stored value is kept exactly
/// representable in float32 (init and optimizer steps quantize), so the
/// float32 checkpoint payload round-trips bit-exactly.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "hydropinn/field.hpp"
#include "hydropinn/losses.hpp"
#include "hydropinn/physics.hpp"
#include "hydropinn/scene.hpp"
#include "hydropinn/tape.hpp"

namespace hydropinn {

struct ModelConfig {
    int in_channels = 2;       // SAR dB, DEM
    int width = 16;
    int modes = 8;             // retained Fourier modes per axis at the bottleneck
    int depth_levels = 3;
    bool probabilistic = true;
    double sigma_floor = 1e-6;
    std::uint64_t rng_seed = 1;
};

void validate(const ModelConfig& cfg);

using ModelParams = std::map<std::string, ad::Tensor>;
using GradTable = std::map<std::string, ad::Tensor>;

struct PredictionPair {
    Field2D mu;
    Field2D sigma2;
    bool has_sigma2 = false;
};

/// Deterministic given cfg.rng_seed. Convolution kernels are Glorot-uniform,
/// spectral weights uniform scaled by 1/(C_in*C_out), gate/head biases zero,
/// and the variance head starts at zero weights so the initial sigma^2 is
/// softplus(0) + sigma_floor everywhere.
[[nodiscard]] ModelParams init_params(const ModelConfig& cfg);

/// Total scalar parameter count implied by cfg (normalization stats included).
[[nodiscard]] long param_count(const ModelConfig& cfg);

/// "norm.*" table entries hold standardization stats, not weights.
[[nodiscard]] bool is_trainable(const std::string& name);

void set_normalization(ModelParams& params, double sar_mean, double sar_std,
                       double dem_mean, double dem_std);

/// Round every parameter value to its float32 representation.
void quantize_params_f32(ModelParams& params);

[[nodiscard]] PredictionPair forward(const ModelParams& params,
                                     const Field2D& sar, const Field2D& dem,
                                     const ModelConfig& cfg);

struct StepResult {
    GradTable grads;        // one entry per trainable parameter
    LossBundle components;
};

/// Forward + total loss + reverse sweep in one call: the gradient of the
/// configured variant's objective with respect to every trainable parameter.
[[nodiscard]] StepResult loss_gradients(const ModelParams& params,
                                        const Scene& scene, int epoch,
                                        const ModelConfig& cfg,
                                        const LossWeights& weights,
                                        const PhysicsConfig& pcfg);

/// Same graph, forward values only (finite-difference checks evaluate this).
[[nodiscard]] LossBundle loss_components(const ModelParams& params,
                                         const Scene& scene, int epoch,
                                         const ModelConfig& cfg,
                                         const LossWeights& weights,
                                         const PhysicsConfig& pcfg);

/// Standalone spectral convolution on a channel stack (forward only).
/// Weights: (Ci, Co, 2K, 4K), interleaved re/im over the (2K, 2K) corner
/// blocks of the spectrum.
[[nodiscard]] ad::Tensor spectral_conv2d(const ad::Tensor& x,
                                         const ad::Tensor& w, int k_max);

struct GateParams {
    ad::Tensor wg;     // (I, C, 1, 1)
    ad::Tensor wx;     // (I, C, 1, 1)
    ad::Tensor b;      // (I)
    ad::Tensor psi_w;  // (1, I, 1, 1)
    ad::Tensor psi_b;  // (1)
};

/// alpha = sigmoid(psi(relu(Wg*g + Wx*x + b))); returns skip * alpha.
[[nodiscard]] ad::Tensor attention_gate(const ad::Tensor& gate_signal,
                                        const ad::Tensor& skip,
                                        const GateParams& gp);

/// Checkpoint format (little-endian):
///   magic "HPNN" | u16 version | i32 in_channels | i32 width | i32 modes |
///   i32 depth_levels | u8 probabilistic | f64 sigma_floor | u64 rng_seed |
///   u32 param_count | per parameter (name-sorted): u16 name length,
///   name bytes, u8 rank, u32 dims..., float32 payload.
void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path);
[[nodiscard]] std::pair<ModelParams, ModelConfig> load_checkpoint(
    const std::string& path);

}  // namespace hydropinn
