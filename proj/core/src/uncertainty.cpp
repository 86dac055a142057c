#include "hydropinn/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hydropinn/special.hpp"

namespace hydropinn {

EnsembleRun run_ensemble(const std::vector<Scene>& train_scenes,
                         const std::vector<Scene>& val_scenes,
                         const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const PhysicsConfig& pcfg, const LossWeights& weights,
                         int members) {
    if (members < 1) {
        throw std::invalid_argument("run_ensemble: members must be >= 1");
    }
    EnsembleRun run;
    run.per_scene.resize(val_scenes.size());
    for (int m = 0; m < members; ++m) {
        ModelConfig mc = mcfg;
        TrainConfig tc = tcfg;
        mc.rng_seed = mcfg.rng_seed + static_cast<std::uint64_t>(m);
        tc.rng_seed = tcfg.rng_seed + static_cast<std::uint64_t>(m);
        TrainResult res = train(train_scenes, val_scenes, mc, tc, pcfg, weights);
        for (std::size_t s = 0; s < val_scenes.size(); ++s) {
            PredictionPair p =
                forward(res.params, val_scenes[s].sar_vh, val_scenes[s].dem, mc);
            if (!p.has_sigma2) {
                throw std::invalid_argument(
                    "run_ensemble: ensemble members need the probabilistic head");
            }
            run.per_scene[s].members.push_back(
                EnsembleMember{std::move(p.mu), std::move(p.sigma2)});
        }
        run.member_params.push_back(std::move(res.params));
        run.histories.push_back(std::move(res.history));
    }
    return run;
}

Decomposition decompose(const EnsembleResult& ens) {
    if (ens.members.empty()) {
        throw std::invalid_argument("decompose: empty ensemble");
    }
    const int rows = ens.members[0].mu.rows;
    const int cols = ens.members[0].mu.cols;
    const double spacing = ens.members[0].mu.spacing;
    const double inv_m = 1.0 / static_cast<double>(ens.members.size());
    for (const auto& mem : ens.members) {
        if (mem.mu.rows != rows || mem.mu.cols != cols ||
            !mem.mu.same_shape(mem.sigma2)) {
            throw std::invalid_argument("decompose: member shape mismatch");
        }
    }

    Decomposition d{Field2D(rows, cols, 0.0, spacing),
                    Field2D(rows, cols, 0.0, spacing),
                    Field2D(rows, cols, 0.0, spacing),
                    Field2D(rows, cols, 0.0, spacing), 0.0};
    for (const auto& mem : ens.members) {
        for (int k = 0; k < d.mu_star.size(); ++k) {
            d.mu_star.v[k] += mem.mu.v[k] * inv_m;
            d.aleatoric.v[k] += mem.sigma2.v[k] * inv_m;
        }
    }
    for (const auto& mem : ens.members) {
        for (int k = 0; k < d.epistemic.size(); ++k) {
            const double r = mem.mu.v[k] - d.mu_star.v[k];
            d.epistemic.v[k] += r * r * inv_m;
        }
    }
    double esum = 0.0, tsum = 0.0;
    for (int k = 0; k < d.total.size(); ++k) {
        d.total.v[k] = d.aleatoric.v[k] + d.epistemic.v[k];
        esum += d.epistemic.v[k];
        tsum += d.total.v[k];
    }
    d.epistemic_ratio = tsum > 0.0 ? esum / tsum : 0.0;
    return d;
}

std::vector<CalibBin> calibration_bins(const std::vector<Field2D>& sigma2_pred,
                                       const std::vector<Field2D>& sq_error,
                                       int bins) {
    if (bins < 2) throw std::invalid_argument("calibration_bins: bins must be >= 2");
    if (sigma2_pred.size() != sq_error.size()) {
        throw std::invalid_argument("calibration_bins: list length mismatch");
    }
    std::vector<std::pair<double, double>> cells;  // (sigma2, sq_err)
    for (std::size_t s = 0; s < sigma2_pred.size(); ++s) {
        if (!sigma2_pred[s].same_shape(sq_error[s])) {
            throw std::invalid_argument("calibration_bins: dimension mismatch");
        }
        for (int k = 0; k < sigma2_pred[s].size(); ++k) {
            cells.emplace_back(sigma2_pred[s].v[k], sq_error[s].v[k]);
        }
    }
    const long n = static_cast<long>(cells.size());
    if (n < bins) {
        throw std::invalid_argument("calibration_bins: fewer cells than bins");
    }
    std::stable_sort(cells.begin(), cells.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    const bool constant = cells.front().first == cells.back().first;
    const int nb = constant ? 1 : bins;
    std::vector<CalibBin> out;
    out.reserve(nb);
    for (int b = 0; b < nb; ++b) {
        const long lo = b * n / nb;
        const long hi = (b + 1) * n / nb;
        CalibBin bin;
        bin.count = hi - lo;
        for (long k = lo; k < hi; ++k) {
            bin.mean_sigma2 += cells[k].first;
            bin.mean_sq_err += cells[k].second;
        }
        bin.mean_sigma2 /= static_cast<double>(bin.count);
        bin.mean_sq_err /= static_cast<double>(bin.count);
        if (bin.count > 1) {
            double ss = 0.0;
            for (long k = lo; k < hi; ++k) {
                const double r = cells[k].second - bin.mean_sq_err;
                ss += r * r;
            }
            bin.sem = std::sqrt(ss / static_cast<double>(bin.count - 1)) /
                      std::sqrt(static_cast<double>(bin.count));
        }
        out.push_back(bin);
    }
    return out;
}

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3) {
        throw std::invalid_argument("ols_fit: need >= 3 paired points");
    }
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - xm) * (x[k] - xm);
        sxy += (x[k] - xm) * (y[k] - ym);
        syy += (y[k] - ym) * (y[k] - ym);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("zero variance in predictor");
    }
    OlsFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    double ss_res = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = y[k] - (fit.intercept + fit.slope * x[k]);
        ss_res += r * r;
    }
    if (syy == 0.0) {
        fit.r_squared = 0.0;  // constant response carries no signal
        fit.p_value = 1.0;
        return fit;
    }
    fit.r_squared = 1.0 - ss_res / syy;
    const double dof = static_cast<double>(n - 2);
    if (ss_res <= 0.0) {
        fit.p_value = 0.0;  // exact fit
        return fit;
    }
    const double se = std::sqrt((ss_res / dof) / sxx);
    fit.p_value = student_t_two_sided_p(fit.slope / se, dof);
    return fit;
}

CalibrationReport make_calibration_report(
    const std::vector<Field2D>& sigma2_pred,
    const std::vector<Field2D>& sq_error, int bins) {
    CalibrationReport rep;
    rep.bins = calibration_bins(sigma2_pred, sq_error, bins);
    rep.degenerate = rep.bins.size() == 1;
    if (!rep.degenerate) {
        std::vector<double> x, y;
        x.reserve(rep.bins.size());
        y.reserve(rep.bins.size());
        for (const auto& b : rep.bins) {
            x.push_back(b.mean_sigma2);
            y.push_back(b.mean_sq_err);
        }
        rep.fit = ols_fit(x, y);
    }
    return rep;
}

}  // namespace hydropinn
