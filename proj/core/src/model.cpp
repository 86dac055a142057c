#include "hydropinn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "hydropinn/rng.hpp"

namespace hydropinn {

void validate(const ModelConfig& cfg) {
    if (cfg.in_channels != 2)
        throw std::invalid_argument("ModelConfig: in_channels must be 2");
    if (cfg.width < 4)
        throw std::invalid_argument("ModelConfig: width must be >= 4");
    if (cfg.modes < 1)
        throw std::invalid_argument("ModelConfig: modes must be >= 1");
    if (cfg.depth_levels < 1)
        throw std::invalid_argument("ModelConfig: depth_levels must be >= 1");
    if (!(cfg.sigma_floor > 0.0))
        throw std::invalid_argument("ModelConfig: sigma_floor must be positive");
}

bool is_trainable(const std::string& name) {
    return name.rfind("norm.", 0) != 0;
}

namespace {

enum class InitKind { glorot, spectral, zeros };

struct ParamSpec {
    std::string name;
    ad::Shape shape;
    InitKind kind;
    double a = 0.0;  // glorot limit or spectral scale
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    validate(cfg);
    const int c = cfg.width;
    const int inter = std::max(c / 2, 1);
    const int tk = 2 * cfg.modes;

    auto glorot3x3 = [](int ci, int co) {
        return std::sqrt(6.0 / (9.0 * ci + 9.0 * co));
    };
    auto glorot1x1 = [](int ci, int co) {
        return std::sqrt(6.0 / (ci + co));
    };

    std::vector<ParamSpec> specs;
    specs.push_back({"norm.sar_mean", ad::shape1(1), InitKind::zeros, 0.0});
    specs.push_back({"norm.sar_std", ad::shape1(1), InitKind::zeros, 0.0});
    specs.push_back({"norm.dem_mean", ad::shape1(1), InitKind::zeros, 0.0});
    specs.push_back({"norm.dem_std", ad::shape1(1), InitKind::zeros, 0.0});

    specs.push_back({"stem.w", ad::shape4(c, cfg.in_channels, 3, 3),
                     InitKind::glorot, glorot3x3(cfg.in_channels, c)});
    specs.push_back({"stem.b", ad::shape1(c), InitKind::zeros, 0.0});
    for (int l = 2; l <= cfg.depth_levels; ++l) {
        const std::string p = "enc" + std::to_string(l);
        specs.push_back({p + ".w", ad::shape4(c, c, 3, 3), InitKind::glorot,
                         glorot3x3(c, c)});
        specs.push_back({p + ".b", ad::shape1(c), InitKind::zeros, 0.0});
    }
    for (int t = 1; t <= 2; ++t) {
        const std::string p = "fno" + std::to_string(t);
        specs.push_back({p + ".spec", ad::shape4(c, c, tk, 2 * tk),
                         InitKind::spectral, 1.0 / (static_cast<double>(c) * c)});
        specs.push_back({p + ".byp.w", ad::shape4(c, c, 1, 1),
                         InitKind::glorot, glorot1x1(c, c)});
        specs.push_back({p + ".byp.b", ad::shape1(c), InitKind::zeros, 0.0});
    }
    for (int l = cfg.depth_levels; l >= 2; --l) {
        const std::string p = "dec" + std::to_string(l);
        specs.push_back({p + ".up.w", ad::shape4(c, c, 3, 3), InitKind::glorot,
                         glorot3x3(c, c)});
        specs.push_back({p + ".up.b", ad::shape1(c), InitKind::zeros, 0.0});
        specs.push_back({p + ".gate.wg", ad::shape4(inter, c, 1, 1),
                         InitKind::glorot, glorot1x1(c, inter)});
        specs.push_back({p + ".gate.wx", ad::shape4(inter, c, 1, 1),
                         InitKind::glorot, glorot1x1(c, inter)});
        specs.push_back({p + ".gate.b", ad::shape1(inter), InitKind::zeros, 0.0});
        specs.push_back({p + ".gate.psi_w", ad::shape4(1, inter, 1, 1),
                         InitKind::glorot, glorot1x1(inter, 1)});
        specs.push_back({p + ".gate.psi_b", ad::shape1(1), InitKind::zeros, 0.0});
        specs.push_back({p + ".fuse.w", ad::shape4(c, 2 * c, 3, 3),
                         InitKind::glorot, glorot3x3(2 * c, c)});
        specs.push_back({p + ".fuse.b", ad::shape1(c), InitKind::zeros, 0.0});
    }
    specs.push_back({"head.mu.w", ad::shape4(1, c, 1, 1), InitKind::glorot,
                     glorot1x1(c, 1)});
    specs.push_back({"head.mu.b", ad::shape1(1), InitKind::zeros, 0.0});
    if (cfg.probabilistic) {
        // Zero weights so the initial variance sits at softplus(0)+floor.
        specs.push_back({"head.sig.w", ad::shape4(1, c, 1, 1), InitKind::zeros,
                         0.0});
        specs.push_back({"head.sig.b", ad::shape1(1), InitKind::zeros, 0.0});
    }
    return specs;
}

double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

ModelParams init_params(const ModelConfig& cfg) {
    ModelParams params;
    Rng rng(cfg.rng_seed);
    for (const auto& spec : param_specs(cfg)) {
        ad::Tensor t(spec.shape, 0.0);
        switch (spec.kind) {
            case InitKind::glorot:
                for (auto& v : t.v) v = f32(rng.uniform(-spec.a, spec.a));
                break;
            case InitKind::spectral:
                for (auto& v : t.v) v = f32(spec.a * rng.uniform());
                break;
            case InitKind::zeros:
                break;
        }
        params.emplace(spec.name, std::move(t));
    }
    set_normalization(params, 0.0, 1.0, 0.0, 1.0);
    return params;
}

long param_count(const ModelConfig& cfg) {
    long n = 0;
    for (const auto& spec : param_specs(cfg)) n += spec.shape.numel();
    return n;
}

void set_normalization(ModelParams& params, double sar_mean, double sar_std,
                       double dem_mean, double dem_std) {
    if (!(sar_std > 0.0) || !(dem_std > 0.0)) {
        throw std::invalid_argument("set_normalization: std must be positive");
    }
    params.at("norm.sar_mean").v[0] = f32(sar_mean);
    params.at("norm.sar_std").v[0] = f32(sar_std);
    params.at("norm.dem_mean").v[0] = f32(dem_mean);
    params.at("norm.dem_std").v[0] = f32(dem_std);
}

void quantize_params_f32(ModelParams& params) {
    for (auto& [name, t] : params) {
        for (auto& v : t.v) v = f32(v);
    }
}

// ---------------------------------------------------------------------------
// graph construction
// ---------------------------------------------------------------------------

namespace {

struct GraphIds {
    int mu = -1;
    int sigma2 = -1;
    std::map<std::string, int> leaves;
};

GraphIds build_forward(ad::Tape& tp, const ModelParams& params,
                       const Field2D& sar, const Field2D& dem,
                       const ModelConfig& cfg) {
    validate(cfg);
    if (!sar.same_shape(dem)) {
        throw std::invalid_argument("forward: sar/dem dimension mismatch");
    }
    const int h = sar.rows, w = sar.cols;
    const int div = 1 << cfg.depth_levels;
    if (h % div != 0 || w % div != 0) {
        throw std::invalid_argument("pad inputs");
    }

    GraphIds ids;
    for (const auto& [name, t] : params) {
        ids.leaves.emplace(name, tp.leaf(t));
    }
    auto P = [&](const std::string& name) {
        auto it = ids.leaves.find(name);
        if (it == ids.leaves.end()) {
            throw std::invalid_argument("missing parameter '" + name + "'");
        }
        return it->second;
    };

    const double sm = params.at("norm.sar_mean").v[0];
    const double ss = params.at("norm.sar_std").v[0];
    const double dm = params.at("norm.dem_mean").v[0];
    const double ds = params.at("norm.dem_std").v[0];

    int sar_n = tp.scale(tp.add_const(tp.leaf(ad::tensor_from_field(sar)), -sm),
                         1.0 / ss);
    int dem_n = tp.scale(tp.add_const(tp.leaf(ad::tensor_from_field(dem)), -dm),
                         1.0 / ds);
    int x = tp.concat_c(sar_n, dem_n);

    std::vector<int> skips;  // features per encoder level, full to coarse
    int f = tp.relu(tp.conv2d(x, P("stem.w"), P("stem.b"), 1));
    skips.push_back(f);
    for (int l = 2; l <= cfg.depth_levels; ++l) {
        const std::string p = "enc" + std::to_string(l);
        f = tp.relu(tp.conv2d(f, P(p + ".w"), P(p + ".b"), 2));
        skips.push_back(f);
    }

    int g = f;
    for (int t = 1; t <= 2; ++t) {
        const std::string p = "fno" + std::to_string(t);
        int spec = tp.spectral_conv(g, P(p + ".spec"), cfg.modes);
        int byp = tp.conv2d(g, P(p + ".byp.w"), P(p + ".byp.b"), 1);
        g = tp.relu(tp.add(spec, byp));
    }

    int d = g;
    for (int l = cfg.depth_levels; l >= 2; --l) {
        const std::string p = "dec" + std::to_string(l);
        d = tp.upsample2(d);
        d = tp.relu(tp.conv2d(d, P(p + ".up.w"), P(p + ".up.b"), 1));
        const int skip = skips[l - 2];
        int q = tp.add(tp.conv2d(d, P(p + ".gate.wg"), -1, 1),
                       tp.conv2d(skip, P(p + ".gate.wx"), P(p + ".gate.b"), 1));
        int alpha = tp.sigmoid(
            tp.conv2d(tp.relu(q), P(p + ".gate.psi_w"), P(p + ".gate.psi_b"), 1));
        int gated = tp.mul_gate(skip, alpha);
        d = tp.relu(
            tp.conv2d(tp.concat_c(d, gated), P(p + ".fuse.w"), P(p + ".fuse.b"), 1));
    }

    ids.mu = tp.conv2d(d, P("head.mu.w"), P("head.mu.b"), 1);
    if (cfg.probabilistic) {
        int raw = tp.conv2d(d, P("head.sig.w"), P("head.sig.b"), 1);
        ids.sigma2 = tp.add_const(tp.softplus(raw), cfg.sigma_floor);
    }
    return ids;
}

struct LossIds {
    int data = -1;
    int dice = -1;
    int mass = -1;
    int smooth = -1;
    int total = -1;
    double physics_weight = 0.0;
};

LossIds build_loss(ad::Tape& tp, const GraphIds& fids, const Scene& scene,
                   int epoch, const LossWeights& w, const PhysicsConfig& pcfg) {
    validate(w);
    validate(pcfg);
    if (w.variant == Variant::uncertainty_aware && fids.sigma2 < 0) {
        throw std::invalid_argument(
            "total_loss: uncertainty_aware variant requires sigma2");
    }
    const double spacing = scene.dem.spacing;
    LossIds out;
    out.physics_weight = w.variant == Variant::baseline_mse
                             ? pcfg.lambda_max
                             : warmstart_weight(epoch, pcfg);

    const int mu = fids.mu;
    int y = tp.leaf(ad::tensor_from_field(scene.depth_true));

    // --- data term ---
    if (w.variant == Variant::uncertainty_aware) {
        int r2 = tp.square(tp.sub(y, mu));
        int nll_pc = tp.scale(
            tp.add(tp.div(r2, fids.sigma2), tp.log_op(fids.sigma2)), 0.5);
        out.data = tp.mean_all(nll_pc);
    } else {
        out.data = tp.mean_all(tp.square(tp.sub(y, mu)));
    }

    // --- dice on the soft water probability (recorded for every variant) ---
    {
        ad::Tensor ymask(ad::shape3(1, scene.dem.rows, scene.dem.cols));
        double ysum = 0.0;
        for (int k = 0; k < scene.dem.size(); ++k) {
            ymask.v[k] = scene.water_mask.bits[k] ? 1.0 : 0.0;
            ysum += ymask.v[k];
        }
        int p = tp.sigmoid(tp.scale(tp.add_const(mu, -w.tau_w), 1.0 / w.temp));
        int inter = tp.sum_all(tp.mul(p, tp.leaf(std::move(ymask))));
        int num = tp.add_const(tp.scale(inter, 2.0), w.dice_eps);
        int den = tp.add_const(tp.sum_all(p), ysum + w.dice_eps);
        out.dice = tp.add_const(tp.neg(tp.div(num, den)), 1.0);
    }

    // --- physics residuals on clamped depth ---
    {
        BitMask2D rmask(scene.dem.rows, scene.dem.cols, false);
        if (pcfg.use_predicted_mask) {
            const ad::Tensor& muv = tp.val(mu);
            for (int k = 0; k < scene.dem.size(); ++k) {
                rmask.bits[k] = muv.v[k] > w.tau_w ? 1 : 0;
            }
        } else {
            rmask = scene.water_mask;
        }
        rmask = interior_mask(erode4(rmask, 2));

        int dem_leaf = tp.leaf(ad::tensor_from_field(scene.dem));
        int depth = tp.relu(mu);
        int wse = tp.add(depth, dem_leaf);
        int sx = tp.grad_x(wse, spacing);
        int sy = tp.grad_y(wse, spacing);
        int a = tp.add_const(tp.hypot_guarded(sx, sy), pcfg.slope_floor);
        int sqrt_a = tp.sqrt_op(a);
        int d23 = tp.pow_pos(depth, 2.0 / 3.0);
        const double inv_n = 1.0 / pcfg.manning_n;
        int u = tp.scale(tp.div(tp.mul(d23, sx), sqrt_a), -inv_n);
        int v = tp.scale(tp.div(tp.mul(d23, sy), sqrt_a), -inv_n);
        int fx = tp.mul(depth, u);
        int fy = tp.mul(depth, v);
        int mass_pc = tp.square(tp.add(tp.grad_x(fx, spacing), tp.grad_y(fy, spacing)));
        int smooth_pc = tp.add(tp.square(sx), tp.square(sy));

        if (w.variant == Variant::uncertainty_aware) {
            // sigma^2 enters the gate as a constant: no gradient may flow
            // into the variance head through the physics relaxation.
            int sg = tp.stop_grad(fids.sigma2);
            int gate = tp.scale(tp.recip(tp.add_const(sg, pcfg.gate_epsilon)),
                                pcfg.gate_epsilon);
            mass_pc = tp.mul(mass_pc, gate);
            smooth_pc = tp.mul(smooth_pc, gate);
        }
        out.mass = tp.masked_mean(mass_pc, rmask);
        out.smooth = tp.masked_mean(smooth_pc, rmask);
    }

    std::vector<std::pair<int, double>> terms;
    if (w.variant == Variant::uncertainty_aware) {
        terms = {{out.data, w.w_nll},
                 {out.dice, w.w_dice},
                 {out.mass, out.physics_weight},
                 {out.smooth, out.physics_weight}};
    } else {
        terms = {{out.data, 1.0},
                 {out.mass, out.physics_weight},
                 {out.smooth, out.physics_weight}};
    }
    out.total = tp.weighted_sum(terms);
    return out;
}

}  // namespace

PredictionPair forward(const ModelParams& params, const Field2D& sar,
                       const Field2D& dem, const ModelConfig& cfg) {
    ad::Tape tp;
    GraphIds ids = build_forward(tp, params, sar, dem, cfg);
    PredictionPair out;
    out.mu = ad::field_from_tensor(tp.val(ids.mu), sar.spacing);
    if (ids.sigma2 >= 0) {
        out.sigma2 = ad::field_from_tensor(tp.val(ids.sigma2), sar.spacing);
        out.has_sigma2 = true;
    }
    return out;
}

StepResult loss_gradients(const ModelParams& params, const Scene& scene,
                          int epoch, const ModelConfig& cfg,
                          const LossWeights& weights,
                          const PhysicsConfig& pcfg) {
    ad::Tape tp;
    GraphIds fids = build_forward(tp, params, scene.sar_vh, scene.dem, cfg);
    LossIds lids = build_loss(tp, fids, scene, epoch, weights, pcfg);
    tp.backward(lids.total);

    StepResult out;
    out.components.data_loss = tp.scalar(lids.data);
    out.components.dice_loss = tp.scalar(lids.dice);
    out.components.mass_loss = tp.scalar(lids.mass);
    out.components.smooth_loss = tp.scalar(lids.smooth);
    out.components.physics_weight = lids.physics_weight;
    out.components.total = tp.scalar(lids.total);
    for (const auto& [name, leaf] : fids.leaves) {
        if (!is_trainable(name)) continue;
        out.grads.emplace(name, tp.grad(leaf));
    }
    return out;
}

LossBundle loss_components(const ModelParams& params, const Scene& scene,
                           int epoch, const ModelConfig& cfg,
                           const LossWeights& weights,
                           const PhysicsConfig& pcfg) {
    ad::Tape tp;
    GraphIds fids = build_forward(tp, params, scene.sar_vh, scene.dem, cfg);
    LossIds lids = build_loss(tp, fids, scene, epoch, weights, pcfg);
    LossBundle out;
    out.data_loss = tp.scalar(lids.data);
    out.dice_loss = tp.scalar(lids.dice);
    out.mass_loss = tp.scalar(lids.mass);
    out.smooth_loss = tp.scalar(lids.smooth);
    out.physics_weight = lids.physics_weight;
    out.total = tp.scalar(lids.total);
    return out;
}

ad::Tensor spectral_conv2d(const ad::Tensor& x, const ad::Tensor& w,
                           int k_max) {
    ad::Tape tp;
    int out = tp.spectral_conv(tp.leaf(x), tp.leaf(w), k_max);
    return tp.val(out);
}

ad::Tensor attention_gate(const ad::Tensor& gate_signal, const ad::Tensor& skip,
                          const GateParams& gp) {
    ad::Tape tp;
    int g = tp.leaf(gate_signal);
    int x = tp.leaf(skip);
    int q = tp.add(tp.conv2d(g, tp.leaf(gp.wg), -1, 1),
                   tp.conv2d(x, tp.leaf(gp.wx), tp.leaf(gp.b), 1));
    int alpha = tp.sigmoid(
        tp.conv2d(tp.relu(q), tp.leaf(gp.psi_w), tp.leaf(gp.psi_b), 1));
    return tp.val(tp.mul_gate(x, alpha));
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'H', 'P', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (is.gcount() != sizeof(T)) {
        throw std::runtime_error("checkpoint: truncated payload");
    }
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    os.write(kMagic, 4);
    put<std::uint16_t>(os, kVersion);
    put<std::int32_t>(os, cfg.in_channels);
    put<std::int32_t>(os, cfg.width);
    put<std::int32_t>(os, cfg.modes);
    put<std::int32_t>(os, cfg.depth_levels);
    put<std::uint8_t>(os, cfg.probabilistic ? 1 : 0);
    put<double>(os, cfg.sigma_floor);
    put<std::uint64_t>(os, cfg.rng_seed);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.rank));
        for (int k = 0; k < t.shape.rank; ++k) {
            put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.d[k]));
        }
        for (double v : t.v) put<float>(os, static_cast<float>(v));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed");
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    const auto version = get<std::uint16_t>(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: version mismatch");
    }
    ModelConfig cfg;
    cfg.in_channels = get<std::int32_t>(is);
    cfg.width = get<std::int32_t>(is);
    cfg.modes = get<std::int32_t>(is);
    cfg.depth_levels = get<std::int32_t>(is);
    cfg.probabilistic = get<std::uint8_t>(is) != 0;
    cfg.sigma_floor = get<double>(is);
    cfg.rng_seed = get<std::uint64_t>(is);
    const auto count = get<std::uint32_t>(is);
    ModelParams params;
    for (std::uint32_t p = 0; p < count; ++p) {
        const auto len = get<std::uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (is.gcount() != len) {
            throw std::runtime_error("checkpoint: truncated payload");
        }
        const auto rank = get<std::uint8_t>(is);
        if (rank < 1 || rank > 4) {
            throw std::runtime_error("checkpoint: bad tensor rank");
        }
        ad::Shape shape;
        shape.rank = rank;
        for (int k = 0; k < rank; ++k) {
            shape.d[k] = static_cast<int>(get<std::uint32_t>(is));
        }
        ad::Tensor t(shape);
        for (auto& v : t.v) v = static_cast<double>(get<float>(is));
        params.emplace(std::move(name), std::move(t));
    }
    return {std::move(params), cfg};
}

}  // namespace hydropinn
