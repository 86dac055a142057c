/// @file scene.hpp
/// @brief Synthetic flood scene generator with known ground truth.
///
/// A Scene bundles everything one observation provides: terrain (DEM), a
/// speckled SAR backscatter channel, the true water depth and mask the flood
/// fill produced, the per-cell variance of the dB-domain noise actually
/// injected (for validating predicted uncertainty), and the radar shadow mask.
///
/// Water is constructed hydrostatically: inside each flooded component,
/// depth + terrain elevation equals the configured water surface elevation,
/// so the smoothness and mass residuals vanish on ground truth by design.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hydropinn/field.hpp"

namespace hydropinn {

struct SceneConfig {
    int grid_size = 64;                       // cells per side
    double spacing = 10.0;                    // meters per cell edge
    double terrain_amplitude = 2.0;           // peak-to-peak relief, meters
    double terrain_correlation_length = 6.0;  // Gaussian smoothing sigma, cells
    double wse_level = 0.9;                   // target water surface elevation, meters
    int seed_count = 3;                       // flood-fill seed points
    double looks_land = 4.0;                  // equivalent number of looks, land
    double looks_water = 1.0;                 // equivalent number of looks, water
    double shadow_azimuth = 90.0;             // wave travel direction, degrees from +x toward +y
    double backscatter_land_db = -8.0;
    double backscatter_water_db = -20.0;
    std::uint64_t rng_seed = 42;
};

/// Throws std::invalid_argument on any violated SceneConfig bound.
void validate(const SceneConfig& cfg);

struct Scene {
    Field2D dem;             // Z, meters
    Field2D sar_vh;          // decibels
    Field2D depth_true;      // meters, >= 0
    BitMask2D water_mask;    // depth_true > 0 exactly here
    Field2D noise_var_true;  // variance of the injected dB-domain noise
    BitMask2D shadow_mask;
};

/// Smoothed, rescaled white noise plus a gentle amplitude-scaled planar tilt
/// (0.001 * spacing * amplitude of elevation per column) so a drainage
/// direction exists. Deterministic given cfg.rng_seed; amplitude 0 gives an
/// all-zero DEM.
[[nodiscard]] Field2D gen_dem(const SceneConfig& cfg);

/// 4-connected flood fill from the given seeds over cells with Z < wse_level,
/// restricted to components actually containing a seed. depth = wse_level - Z
/// on filled cells, 0 elsewhere. No seed below the level is a valid "no
/// flood" scene (empty mask), not an error.
[[nodiscard]] std::pair<Field2D, BitMask2D> flood_fill_depth(
    const Field2D& dem, double wse_level,
    const std::vector<std::pair<int, int>>& seeds);

struct SarResult {
    Field2D sar_vh;
    Field2D noise_var_true;
    BitMask2D shadow_mask;
};

/// Speckled backscatter over the scene:
///  - clean level: water backscatter on water; land backscatter plus
///    4 dB * clamped local slope magnitude on land; shadowed cells fall to
///    the water floor,
///  - multiplicative Gamma(L, 1/L) speckle with per-cell L,
///  - shadow via line-of-sight occlusion at fixed 35 degree incidence along
///    the (8-neighbour quantized) azimuth direction; shadowed cells carry
///    4x the analytic dB noise variance (topped up with Gaussian dB noise so
///    the recorded variance map stays truthful),
///  - noise_var_true = (10/ln 10)^2 * trigamma(L), 4x in shadow.
[[nodiscard]] SarResult simulate_sar(const Field2D& dem, const Field2D& depth,
                                     const BitMask2D& mask,
                                     const SceneConfig& cfg);

/// Full pipeline: DEM, seed placement at well-separated elevation minima,
/// flood fill, SAR simulation. Deterministic given cfg.
[[nodiscard]] Scene make_scene(const SceneConfig& cfg);

/// Convenience: `count` scenes with rng_seed = cfg.rng_seed + index.
[[nodiscard]] std::vector<Scene> make_scene_set(const SceneConfig& cfg,
                                                int count,
                                                std::uint64_t seed_offset = 0);

}  // namespace hydropinn
