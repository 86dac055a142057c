#include "hydropinn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hydropinn/rng.hpp"
#include "hydropinn/util.hpp"

namespace hydropinn {

void validate(const TrainConfig& cfg) {
    if (!(cfg.lr_min > 0.0) || !(cfg.lr_min <= cfg.lr_max))
        throw std::invalid_argument("TrainConfig: need 0 < lr_min <= lr_max");
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
        throw std::invalid_argument("TrainConfig: betas must be in [0,1)");
    if (cfg.epochs < 0)
        throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (cfg.batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (cfg.t0 < 1 || cfg.t_mult < 1)
        throw std::invalid_argument("TrainConfig: t0 and t_mult must be >= 1");
    if (cfg.early_stop_patience < 1)
        throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (!(cfg.adam_eps > 0.0))
        throw std::invalid_argument("TrainConfig: adam_eps must be positive");
    if (cfg.weight_decay < 0.0)
        throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
}

void adamw_step(ModelParams& params, const GradTable& grads, AdamState& state,
                double lr, const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, theta] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const ad::Tensor& g = git->second;
        auto& m = state.m.try_emplace(name, theta.shape, 0.0).first->second;
        auto& v = state.v.try_emplace(name, theta.shape, 0.0).first->second;
        for (std::size_t k = 0; k < theta.v.size(); ++k) {
            m.v[k] = cfg.beta1 * m.v[k] + (1.0 - cfg.beta1) * g.v[k];
            v.v[k] = cfg.beta2 * v.v[k] + (1.0 - cfg.beta2) * g.v[k] * g.v[k];
            const double mhat = m.v[k] / bc1;
            const double vhat = v.v[k] / bc2;
            double x = theta.v[k];
            x -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            x -= lr * cfg.weight_decay * theta.v[k];
            theta.v[k] = static_cast<double>(static_cast<float>(x));
        }
    }
}

double cosine_warm_restart_lr(double t, double cycle_len,
                              const TrainConfig& cfg) {
    if (t < 0.0 || t > cycle_len) {
        throw std::invalid_argument("cosine_warm_restart_lr: t outside cycle");
    }
    return cfg.lr_min +
           0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(M_PI * t / cycle_len));
}

std::pair<double, double> cycle_position(int epoch, const TrainConfig& cfg) {
    long start = 0;
    long len = cfg.t0;
    while (epoch >= start + len) {
        start += len;
        len *= cfg.t_mult;
    }
    return {static_cast<double>(epoch - start), static_cast<double>(len)};
}

namespace {

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double sq_err = 0.0;
    double abs_err = 0.0;
    long cells = 0;
};

double safe_ratio(double num, double den, bool nothing_positive) {
    if (den == 0.0) return nothing_positive ? 1.0 : 0.0;
    return num / den;
}

MetricsRecord metrics_from_confusion(const Confusion& c) {
    const bool nothing = c.tp == 0 && c.fp == 0 && c.fn == 0;
    MetricsRecord m;
    m.iou = safe_ratio(static_cast<double>(c.tp),
                       static_cast<double>(c.tp + c.fp + c.fn), nothing);
    m.f1 = safe_ratio(2.0 * static_cast<double>(c.tp),
                      static_cast<double>(2 * c.tp + c.fp + c.fn), nothing);
    m.precision = safe_ratio(static_cast<double>(c.tp),
                             static_cast<double>(c.tp + c.fp), nothing);
    m.recall = safe_ratio(static_cast<double>(c.tp),
                          static_cast<double>(c.tp + c.fn), nothing);
    m.rmse = c.cells > 0 ? std::sqrt(c.sq_err / static_cast<double>(c.cells)) : 0.0;
    m.mae = c.cells > 0 ? c.abs_err / static_cast<double>(c.cells) : 0.0;
    return m;
}

Confusion scene_confusion(const ModelParams& params, const Scene& scene,
                          const ModelConfig& mcfg, const LossWeights& weights) {
    PredictionPair pred = forward(params, scene.sar_vh, scene.dem, mcfg);
    Confusion c;
    for (int k = 0; k < scene.dem.size(); ++k) {
        const bool p = pred.mu.v[k] > weights.tau_w;
        const bool t = scene.water_mask.bits[k] != 0;
        if (p && t) ++c.tp;
        else if (p && !t) ++c.fp;
        else if (!p && t) ++c.fn;
        else ++c.tn;
        const double r = scene.depth_true.v[k] - pred.mu.v[k];
        c.sq_err += r * r;
        c.abs_err += std::fabs(r);
    }
    c.cells = scene.dem.size();
    return c;
}

}  // namespace

MetricsRecord evaluate(const ModelParams& params,
                       const std::vector<Scene>& scenes,
                       const ModelConfig& mcfg, const LossWeights& weights) {
    if (scenes.empty()) {
        throw std::invalid_argument("evaluate: empty scene list");
    }
    std::vector<Confusion> parts(scenes.size());
    parallel_for(static_cast<int>(scenes.size()), [&](int i) {
        parts[i] = scene_confusion(params, scenes[i], mcfg, weights);
    });
    Confusion total;
    for (const auto& c : parts) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
        total.tn += c.tn;
        total.sq_err += c.sq_err;
        total.abs_err += c.abs_err;
        total.cells += c.cells;
    }
    return metrics_from_confusion(total);
}

TrainResult train(const std::vector<Scene>& train_scenes,
                  const std::vector<Scene>& val_scenes,
                  const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const PhysicsConfig& pcfg, const LossWeights& weights) {
    validate(mcfg);
    validate(tcfg);
    validate(pcfg);
    validate(weights);
    if (train_scenes.empty()) {
        throw std::invalid_argument("train: empty training set");
    }

    ModelParams params = init_params(mcfg);

    // Standardization stats over the training split.
    {
        double s_sum = 0.0, s_sq = 0.0, d_sum = 0.0, d_sq = 0.0;
        long n = 0;
        for (const auto& sc : train_scenes) {
            for (int k = 0; k < sc.dem.size(); ++k) {
                s_sum += sc.sar_vh.v[k];
                s_sq += sc.sar_vh.v[k] * sc.sar_vh.v[k];
                d_sum += sc.dem.v[k];
                d_sq += sc.dem.v[k] * sc.dem.v[k];
                ++n;
            }
        }
        const double sm = s_sum / n;
        const double dm = d_sum / n;
        const double ss = std::sqrt(std::max(s_sq / n - sm * sm, 1e-12));
        const double ds = std::sqrt(std::max(d_sq / n - dm * dm, 1e-12));
        set_normalization(params, sm, ss, dm, ds);
    }

    TrainResult result;
    result.params = params;  // epochs == 0 returns the initial parameters
    AdamState state;
    Rng rng(tcfg.rng_seed);

    double best_iou = -1.0;
    int best_epoch = -1;

    std::vector<int> order(train_scenes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        auto [t, cycle] = cycle_position(epoch, tcfg);
        const double lr = cosine_warm_restart_lr(t, cycle, tcfg);

        shuffle(order, rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.physics_weight = weights.variant == Variant::baseline_mse
                                 ? pcfg.lambda_max
                                 : warmstart_weight(epoch, pcfg);

        for (std::size_t ofs = 0; ofs < order.size(); ofs += tcfg.batch_size) {
            const std::size_t end =
                std::min(ofs + static_cast<std::size_t>(tcfg.batch_size),
                         order.size());
            const int nb = static_cast<int>(end - ofs);
            std::vector<StepResult> steps(nb);
            parallel_for(nb, [&](int i) {
                steps[i] = loss_gradients(params, train_scenes[order[ofs + i]],
                                          epoch, mcfg, weights, pcfg);
            });
            GradTable batch_grads;
            const double inv = 1.0 / nb;
            for (int i = 0; i < nb; ++i) {  // fixed order keeps runs bit-identical
                for (const auto& [name, g] : steps[i].grads) {
                    auto it = batch_grads.try_emplace(name, g.shape, 0.0).first;
                    for (std::size_t k = 0; k < g.v.size(); ++k) {
                        it->second.v[k] += g.v[k] * inv;
                    }
                }
                rec.data_loss += steps[i].components.data_loss;
                rec.dice_loss += steps[i].components.dice_loss;
                rec.mass_loss += steps[i].components.mass_loss;
                rec.smooth_loss += steps[i].components.smooth_loss;
                rec.total_loss += steps[i].components.total;
            }
            adamw_step(params, batch_grads, state, lr, tcfg);
        }
        const double inv_scenes = 1.0 / static_cast<double>(train_scenes.size());
        rec.data_loss *= inv_scenes;
        rec.dice_loss *= inv_scenes;
        rec.mass_loss *= inv_scenes;
        rec.smooth_loss *= inv_scenes;
        rec.total_loss *= inv_scenes;

        if (!val_scenes.empty()) {
            MetricsRecord m = evaluate(params, val_scenes, mcfg, weights);
            rec.val_iou = m.iou;
            rec.val_rmse = m.rmse;
        }
        result.history.rows.push_back(rec);

        if (val_scenes.empty()) {
            result.params = params;  // no validation: keep the latest
            continue;
        }
        if (rec.val_iou > best_iou) {
            best_iou = rec.val_iou;
            best_epoch = epoch;
            result.params = params;
        }
        if (epoch - best_epoch >= tcfg.early_stop_patience) {
            break;
        }
    }
    return result;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << "epoch,data_loss,dice_loss,mass_loss,smooth_loss,physics_weight,"
          "total_loss,val_iou,val_rmse\n";
    for (const auto& r : history.rows) {
        os << r.epoch << ',' << format_double(r.data_loss) << ','
           << format_double(r.dice_loss) << ',' << format_double(r.mass_loss)
           << ',' << format_double(r.smooth_loss) << ','
           << format_double(r.physics_weight) << ','
           << format_double(r.total_loss) << ',' << format_double(r.val_iou)
           << ',' << format_double(r.val_rmse) << '\n';
    }
}

TrainHistory read_history_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    TrainHistory h;
    std::string line;
    if (!std::getline(is, line)) return h;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        EpochRecord r;
        char comma;
        ss >> r.epoch >> comma >> r.data_loss >> comma >> r.dice_loss >> comma >>
            r.mass_loss >> comma >> r.smooth_loss >> comma >> r.physics_weight >>
            comma >> r.total_loss >> comma >> r.val_iou >> comma >> r.val_rmse;
        if (ss.fail()) {
            throw std::runtime_error("malformed history row in '" + path + "'");
        }
        h.rows.push_back(r);
    }
    return h;
}

}  // namespace hydropinn
