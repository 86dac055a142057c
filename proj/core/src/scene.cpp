#include "hydropinn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "hydropinn/rng.hpp"
#include "hydropinn/special.hpp"

namespace hydropinn {

namespace {

constexpr double kDbPerNep = 10.0 / M_LN10;  // 10 / ln 10
constexpr double kIncidenceDeg = 35.0;       // from vertical
constexpr double kSlopeGainDb = 4.0;
constexpr double kShadowVarFactor = 4.0;

std::uint64_t mix_seed(std::uint64_t s) {
    // splitmix64 finalizer; decorrelates the SAR stream from the DEM stream.
    s += 0x9e3779b97f4a7c15ULL;
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    return s ^ (s >> 31);
}

// Separable Gaussian blur with clamp-to-edge indexing.
void gaussian_smooth(Field2D& f, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double ksum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        k[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
        ksum += k[t + radius];
    }
    for (auto& w : k) w /= ksum;

    Field2D tmp = f;
    for (int i = 0; i < f.rows; ++i) {
        for (int j = 0; j < f.cols; ++j) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                const int jj = std::clamp(j + t, 0, f.cols - 1);
                acc += k[t + radius] * f.at(i, jj);
            }
            tmp.at(i, j) = acc;
        }
    }
    for (int j = 0; j < f.cols; ++j) {
        for (int i = 0; i < f.rows; ++i) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                const int ii = std::clamp(i + t, 0, f.rows - 1);
                acc += k[t + radius] * tmp.at(ii, j);
            }
            f.at(i, j) = acc;
        }
    }
}

}  // namespace

void validate(const SceneConfig& cfg) {
    if (cfg.grid_size < 16)
        throw std::invalid_argument("SceneConfig: grid_size must be >= 16");
    if (!(cfg.spacing > 0.0))
        throw std::invalid_argument("SceneConfig: spacing must be positive");
    if (cfg.terrain_amplitude < 0.0)
        throw std::invalid_argument("SceneConfig: terrain_amplitude must be >= 0");
    if (cfg.seed_count <= 0)
        throw std::invalid_argument("SceneConfig: seed_count must be positive");
    if (!(cfg.looks_land >= 1.0) || !(cfg.looks_water >= 1.0))
        throw std::invalid_argument("SceneConfig: looks must be >= 1");
    if (!(cfg.backscatter_water_db < cfg.backscatter_land_db))
        throw std::invalid_argument(
            "SceneConfig: water backscatter must be below land backscatter");
}

Field2D gen_dem(const SceneConfig& cfg) {
    validate(cfg);
    const int n = cfg.grid_size;
    Field2D dem(n, n, 0.0, cfg.spacing);
    if (cfg.terrain_amplitude == 0.0) return dem;

    Rng rng(cfg.rng_seed);
    for (auto& x : dem.v) x = rng.normal();
    gaussian_smooth(dem, cfg.terrain_correlation_length);

    const double lo = dem.min();
    const double ptp = dem.max() - lo;
    const double scale = ptp > 0.0 ? cfg.terrain_amplitude / ptp : 0.0;
    const double tilt = 0.001 * cfg.spacing * cfg.terrain_amplitude;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            dem.at(i, j) = (dem.at(i, j) - lo) * scale + tilt * j;
        }
    }
    return dem;
}

std::pair<Field2D, BitMask2D> flood_fill_depth(
    const Field2D& dem, double wse_level,
    const std::vector<std::pair<int, int>>& seeds) {
    Field2D depth(dem.rows, dem.cols, 0.0, dem.spacing);
    BitMask2D mask(dem.rows, dem.cols, false);

    std::deque<std::pair<int, int>> queue;
    for (const auto& [si, sj] : seeds) {
        if (si < 0 || si >= dem.rows || sj < 0 || sj >= dem.cols) {
            throw std::invalid_argument("flood_fill_depth: seed out of bounds");
        }
        if (dem.at(si, sj) < wse_level && !mask.get(si, sj)) {
            mask.set(si, sj, true);
            queue.emplace_back(si, sj);
        }
    }
    constexpr int di[4] = {-1, 1, 0, 0};
    constexpr int dj[4] = {0, 0, -1, 1};
    while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        for (int d = 0; d < 4; ++d) {
            const int ni = i + di[d];
            const int nj = j + dj[d];
            if (ni < 0 || ni >= dem.rows || nj < 0 || nj >= dem.cols) continue;
            if (mask.get(ni, nj) || !(dem.at(ni, nj) < wse_level)) continue;
            mask.set(ni, nj, true);
            queue.emplace_back(ni, nj);
        }
    }
    for (int k = 0; k < depth.size(); ++k) {
        if (mask.bits[k]) depth.v[k] = wse_level - dem.v[k];
    }
    return {std::move(depth), std::move(mask)};
}

SarResult simulate_sar(const Field2D& dem, const Field2D& depth,
                       const BitMask2D& mask, const SceneConfig& cfg) {
    if (!dem.same_shape(depth) || !mask.same_shape(dem)) {
        throw std::invalid_argument("simulate_sar: dimension mismatch");
    }
    validate(cfg);
    const int rows = dem.rows;
    const int cols = dem.cols;

    // Shadow: march lines along the azimuth direction quantized to the
    // nearest 8-neighbour step; a cell is occluded when some earlier cell
    // rises above its line of sight at the fixed incidence.
    BitMask2D shadow(rows, cols, false);
    {
        const double az = cfg.shadow_azimuth * M_PI / 180.0;
        const int dj = static_cast<int>(std::lround(std::cos(az)));
        const int di = static_cast<int>(std::lround(std::sin(az)));
        const double step =
            dem.spacing * std::sqrt(static_cast<double>(di * di + dj * dj));
        const double tan_elev = std::tan((90.0 - kIncidenceDeg) * M_PI / 180.0);
        for (int i0 = 0; i0 < rows; ++i0) {
            for (int j0 = 0; j0 < cols; ++j0) {
                const int pi = i0 - di;
                const int pj = j0 - dj;
                const bool is_entry =
                    pi < 0 || pi >= rows || pj < 0 || pj >= cols;
                if (!is_entry) continue;
                double horizon = -1e300;
                int i = i0, j = j0, s = 0;
                while (i >= 0 && i < rows && j >= 0 && j < cols) {
                    const double key = dem.at(i, j) + s * step * tan_elev;
                    if (horizon > key + 1e-12) shadow.set(i, j, true);
                    horizon = std::max(horizon, key);
                    i += di;
                    j += dj;
                    ++s;
                }
            }
        }
    }

    // Local slope steers the clean land backscatter.
    GradPair g = grad_central(dem);

    Field2D sar(rows, cols, 0.0, dem.spacing);
    Field2D var(rows, cols, 0.0, dem.spacing);
    Rng rng(mix_seed(cfg.rng_seed));

    const double var_land = kDbPerNep * kDbPerNep * trigamma(cfg.looks_land);
    const double var_water = kDbPerNep * kDbPerNep * trigamma(cfg.looks_water);

    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const bool water = mask.get(i, j);
            const bool shadowed = shadow.get(i, j);
            double beta;
            if (shadowed || water) {
                beta = cfg.backscatter_water_db;
            } else {
                const double slope = std::min(
                    1.0, std::hypot(g.dx.at(i, j), g.dy.at(i, j)));
                beta = cfg.backscatter_land_db + kSlopeGainDb * slope;
            }
            const double looks = water ? cfg.looks_water : cfg.looks_land;
            const double speckle = rng.gamma(looks) / looks;
            const double intensity =
                std::pow(10.0, beta / 10.0) * std::max(speckle, 1e-300);
            sar.at(i, j) = 10.0 * std::log10(intensity);
            var.at(i, j) = water ? var_water : var_land;
            if (shadowed) var.at(i, j) *= kShadowVarFactor;
        }
    }
    // Top up shadow cells with additive dB noise so their realized variance
    // matches the recorded 4x map.
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (!shadow.get(i, j)) continue;
            const double base = mask.get(i, j) ? var_water : var_land;
            sar.at(i, j) += rng.normal() * std::sqrt((kShadowVarFactor - 1.0) * base);
        }
    }
    return {std::move(sar), std::move(var), std::move(shadow)};
}

Scene make_scene(const SceneConfig& cfg) {
    Field2D dem = gen_dem(cfg);
    const int n = cfg.grid_size;

    // Seeds at well-separated elevation minima so floods exist whenever any
    // terrain lies below the target level.
    std::vector<int> order(dem.size());
    for (int k = 0; k < dem.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (dem.v[a] != dem.v[b]) return dem.v[a] < dem.v[b];
        return a < b;
    });
    const int min_sep = std::max(2, n / 8);
    std::vector<std::pair<int, int>> seeds;
    for (int k : order) {
        if (static_cast<int>(seeds.size()) >= cfg.seed_count) break;
        const int i = k / n;
        const int j = k % n;
        bool ok = true;
        for (const auto& [si, sj] : seeds) {
            if (std::max(std::abs(si - i), std::abs(sj - j)) < min_sep) {
                ok = false;
                break;
            }
        }
        if (ok) seeds.emplace_back(i, j);
    }

    auto [depth, mask] = flood_fill_depth(dem, cfg.wse_level, seeds);
    SarResult sar = simulate_sar(dem, depth, mask, cfg);
    return Scene{std::move(dem),          std::move(sar.sar_vh),
                 std::move(depth),        std::move(mask),
                 std::move(sar.noise_var_true), std::move(sar.shadow_mask)};
}

std::vector<Scene> make_scene_set(const SceneConfig& cfg, int count,
                                  std::uint64_t seed_offset) {
    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (int k = 0; k < count; ++k) {
        SceneConfig c = cfg;
        c.rng_seed = cfg.rng_seed + seed_offset + static_cast<std::uint64_t>(k);
        scenes.push_back(make_scene(c));
    }
    return scenes;
}

}  // namespace hydropinn
