#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hydropinn/gridio.hpp"
#include "hydropinn/rng.hpp"
#include "hydropinn/util.hpp"

namespace fs = std::filesystem;

namespace hydropinn::cli {

namespace {

// dB^2 -> m^2 map for the oracle predictor's depth-domain variance.
constexpr double kDepthPerDb = 0.02;

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y%m%d-%H%M%S");
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << text;
}

void say(bool quiet, const std::string& msg) {
    if (!quiet) std::cout << msg << "\n";
}

double physics_of(const EpochRecord& r) { return r.mass_loss + r.smooth_loss; }

double pop_stdev(const std::vector<double>& xs, double mean) {
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

void write_calibration_csv(const std::string& path,
                           const CalibrationReport& rep) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "'");
    os << "bin,mean_sigma2,mean_sq_err,sem,count\n";
    for (std::size_t b = 0; b < rep.bins.size(); ++b) {
        os << b << ',' << format_double(rep.bins[b].mean_sigma2) << ','
           << format_double(rep.bins[b].mean_sq_err) << ','
           << format_double(rep.bins[b].sem) << ',' << rep.bins[b].count << '\n';
    }
    os << "# slope=" << format_double(rep.fit.slope)
       << " intercept=" << format_double(rep.fit.intercept)
       << " r_squared=" << format_double(rep.fit.r_squared)
       << " p_value=" << format_double(rep.fit.p_value)
       << " degenerate=" << (rep.degenerate ? 1 : 0) << '\n';
}

void write_fit_csv(const std::string& path, const OlsFit& fit,
                   bool degenerate) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "'");
    os << "slope,intercept,r_squared,p_value,degenerate\n";
    os << format_double(fit.slope) << ',' << format_double(fit.intercept) << ','
       << format_double(fit.r_squared) << ',' << format_double(fit.p_value)
       << ',' << (degenerate ? 1 : 0) << '\n';
}

}  // namespace

std::string make_run_dir(const RunConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.output_dir);
    const std::string stamp = timestamp_utc();
    for (int seq = 0;; ++seq) {
        fs::path dir = fs::path(cfg.output_dir) /
                       (command + "-" + stamp + "-" + std::to_string(seq));
        if (!fs::exists(dir)) {
            fs::create_directories(dir);
            write_text((dir / "resolved_config.txt").string(),
                       echo_config(cfg));
            return dir.string();
        }
    }
}

std::pair<std::vector<Scene>, std::vector<Scene>> build_suite(
    const RunConfig& cfg) {
    if (cfg.train_scenes < 1 || cfg.val_scenes < 0) {
        throw std::invalid_argument("suite: need >= 1 train scenes");
    }
    std::vector<Scene> train_scenes(cfg.train_scenes);
    std::vector<Scene> val_scenes(cfg.val_scenes);
    parallel_for(cfg.train_scenes, [&](int i) {
        SceneConfig c = cfg.scene;
        c.rng_seed = cfg.scene.rng_seed + static_cast<std::uint64_t>(i);
        train_scenes[i] = make_scene(c);
    });
    parallel_for(cfg.val_scenes, [&](int i) {
        SceneConfig c = cfg.scene;
        c.rng_seed = cfg.scene.rng_seed + 1000000ULL + static_cast<std::uint64_t>(i);
        val_scenes[i] = make_scene(c);
    });
    return {std::move(train_scenes), std::move(val_scenes)};
}

// ---------------------------------------------------------------------------

SynthSummary cmd_synth(const RunConfig& cfg, bool quiet) {
    SynthSummary out;
    out.run_dir = make_run_dir(cfg, "synth");
    for (int i = 0; i < cfg.synth_count; ++i) {
        SceneConfig c = cfg.scene;
        c.rng_seed = cfg.scene.rng_seed + static_cast<std::uint64_t>(i);
        Scene sc = make_scene(c);
        fs::path dir = fs::path(out.run_dir) /
                       ("scene" + std::to_string(i));
        fs::create_directories(dir);
        write_grid((dir / "dem.f32f").string(), sc.dem);
        write_grid((dir / "sar_vh.f32f").string(), sc.sar_vh);
        write_grid((dir / "depth_true.f32f").string(), sc.depth_true);
        write_mask((dir / "water_mask.f32f").string(), sc.water_mask,
                   sc.dem.spacing);
        write_grid((dir / "noise_var.f32f").string(), sc.noise_var_true);
        write_mask((dir / "shadow_mask.f32f").string(), sc.shadow_mask,
                   sc.dem.spacing);
        std::ostringstream manifest;
        manifest << "grid_size = " << c.grid_size << "\n"
                 << "spacing = " << format_double(c.spacing) << "\n"
                 << "terrain_amplitude = " << format_double(c.terrain_amplitude)
                 << "\n"
                 << "terrain_correlation_length = "
                 << format_double(c.terrain_correlation_length) << "\n"
                 << "wse_level = " << format_double(c.wse_level) << "\n"
                 << "seed_count = " << c.seed_count << "\n"
                 << "looks_land = " << format_double(c.looks_land) << "\n"
                 << "looks_water = " << format_double(c.looks_water) << "\n"
                 << "shadow_azimuth = " << format_double(c.shadow_azimuth)
                 << "\n"
                 << "backscatter_land_db = "
                 << format_double(c.backscatter_land_db) << "\n"
                 << "backscatter_water_db = "
                 << format_double(c.backscatter_water_db) << "\n"
                 << "rng_seed = " << c.rng_seed << "\n"
                 << "water_fraction = "
                 << format_double(static_cast<double>(sc.water_mask.count()) /
                                  sc.water_mask.size())
                 << "\n";
        write_text((dir / "manifest.txt").string(), manifest.str());
        out.scene_dirs.push_back(dir.string());
    }
    say(quiet, "synth: wrote " + std::to_string(cfg.synth_count) +
                   " scenes under " + out.run_dir);
    return out;
}

// ---------------------------------------------------------------------------

TrainSummary cmd_train(const RunConfig& cfg, bool quiet) {
    TrainSummary out;
    out.run_dir = make_run_dir(cfg, "train");
    auto [train_scenes, val_scenes] = build_suite(cfg);

    ModelConfig mcfg = cfg.model;
    mcfg.probabilistic = cfg.loss.variant == Variant::uncertainty_aware;
    TrainResult res =
        train(train_scenes, val_scenes, mcfg, cfg.train, cfg.physics, cfg.loss);

    out.history = res.history;
    out.history_csv = (fs::path(out.run_dir) / "history.csv").string();
    write_history_csv(out.history_csv, res.history);
    out.checkpoint = (fs::path(out.run_dir) / "checkpoint.hpnn").string();
    save_checkpoint(res.params, mcfg, out.checkpoint);

    if (!val_scenes.empty()) {
        out.metrics = evaluate(res.params, val_scenes, mcfg, cfg.loss);
    }
    std::ostringstream ms;
    ms << "iou,f1,precision,recall,rmse,mae\n"
       << format_double(out.metrics.iou) << ',' << format_double(out.metrics.f1)
       << ',' << format_double(out.metrics.precision) << ','
       << format_double(out.metrics.recall) << ','
       << format_double(out.metrics.rmse) << ','
       << format_double(out.metrics.mae) << '\n';
    write_text((fs::path(out.run_dir) / "metrics.csv").string(), ms.str());
    say(quiet, "train: val IoU " + format_double(out.metrics.iou) + ", RMSE " +
                   format_double(out.metrics.rmse) + " -> " + out.run_dir);
    return out;
}

// ---------------------------------------------------------------------------

ShockSummary cmd_shock(const RunConfig& cfg, bool quiet) {
    ShockSummary out;
    out.run_dir = make_run_dir(cfg, "shock");
    const int repeats = cfg.repeats > 0 ? cfg.repeats : 5;
    auto [train_scenes, val_scenes] = build_suite(cfg);

    TrainConfig tcfg = cfg.train;
    tcfg.epochs = cfg.physics.e_warm + cfg.physics.e_ramp + 6;
    tcfg.early_stop_patience = tcfg.epochs + 1;  // full-length histories

    const int late_epoch = cfg.physics.e_warm + cfg.physics.e_ramp + 5;

    for (int r = 0; r < repeats; ++r) {
        ShockSeedRow row;
        row.seed_offset = static_cast<std::uint64_t>(r);

        ModelConfig mc = cfg.model;
        mc.rng_seed = cfg.model.rng_seed + row.seed_offset;
        TrainConfig tc = tcfg;
        tc.rng_seed = cfg.train.rng_seed + row.seed_offset;

        // Arm 1: physics at full weight from epoch 0.
        {
            ModelConfig m = mc;
            m.probabilistic = false;
            LossWeights w = cfg.loss;
            w.variant = Variant::baseline_mse;
            TrainResult res =
                train(train_scenes, val_scenes, m, tc, cfg.physics, w);
            write_history_csv((fs::path(out.run_dir) /
                               ("history_baseline_seed" + std::to_string(r) +
                                ".csv"))
                                  .string(),
                              res.history);
            row.baseline_epoch0 = physics_of(res.history.rows.at(0));
            row.baseline_epoch5 = physics_of(res.history.rows.at(5));
            row.ratio = row.baseline_epoch5 / row.baseline_epoch0;
            row.shocked = !std::isfinite(row.baseline_epoch5) ||
                          (std::isfinite(row.ratio) && row.ratio >= 3.0);
        }
        // Arm 2: dynamic warm start with the uncertainty-aware objective.
        {
            ModelConfig m = mc;
            m.probabilistic = true;
            LossWeights w = cfg.loss;
            w.variant = Variant::uncertainty_aware;
            TrainResult res =
                train(train_scenes, val_scenes, m, tc, cfg.physics, w);
            write_history_csv((fs::path(out.run_dir) /
                               ("history_warmstart_seed" + std::to_string(r) +
                                ".csv"))
                                  .string(),
                              res.history);
            row.warm_activation =
                physics_of(res.history.rows.at(cfg.physics.e_warm));
            row.warm_late = physics_of(res.history.rows.at(late_epoch));
            row.stabilized = std::isfinite(row.warm_late) &&
                             row.warm_late <= row.warm_activation;
        }
        out.rows.push_back(row);
        out.shocked_count += row.shocked ? 1 : 0;
        out.stabilized_count += row.stabilized ? 1 : 0;
        say(quiet, "shock: seed " + std::to_string(r) + " ratio " +
                       format_double(row.ratio) + (row.shocked ? " (shock)" : "") +
                       ", warm " + format_double(row.warm_activation) + " -> " +
                       format_double(row.warm_late) +
                       (row.stabilized ? " (stable)" : ""));
    }

    if (cfg.physics.lambda_max == 0.0) {
        out.verdict = "no shock possible";
    } else {
        std::ostringstream v;
        v << "shock in " << out.shocked_count << "/" << repeats
          << " baseline seeds; stable in " << out.stabilized_count << "/"
          << repeats << " warm-start seeds";
        out.verdict = v.str();
    }

    std::ostringstream ss;
    ss << "seed,baseline_epoch0,baseline_epoch5,ratio,shocked,"
          "warm_activation,warm_late,stabilized\n";
    for (const auto& row : out.rows) {
        ss << row.seed_offset << ',' << format_double(row.baseline_epoch0)
           << ',' << format_double(row.baseline_epoch5) << ','
           << format_double(row.ratio) << ',' << (row.shocked ? 1 : 0) << ','
           << format_double(row.warm_activation) << ','
           << format_double(row.warm_late) << ',' << (row.stabilized ? 1 : 0)
           << '\n';
    }
    ss << "# verdict: " << out.verdict << '\n';
    write_text((fs::path(out.run_dir) / "shock_summary.csv").string(), ss.str());
    say(quiet, "shock: " + out.verdict);
    return out;
}

// ---------------------------------------------------------------------------

AblationSummary cmd_ablation(const RunConfig& cfg, bool quiet) {
    AblationSummary out;
    out.run_dir = make_run_dir(cfg, "ablation");
    const int repeats = cfg.repeats > 0 ? cfg.repeats : 3;
    auto [train_scenes, val_scenes] = build_suite(cfg);
    if (val_scenes.empty()) {
        throw std::invalid_argument("ablation: needs validation scenes");
    }

    const Variant variants[] = {Variant::baseline_mse, Variant::stabilized_mse,
                                Variant::uncertainty_aware};
    std::ofstream runs_csv(fs::path(out.run_dir) / "ablation_runs.csv");
    runs_csv << "variant,seed,val_iou\n";

    for (Variant variant : variants) {
        AblationRow row;
        row.variant = variant;
        for (int r = 0; r < repeats; ++r) {
            ModelConfig mc = cfg.model;
            mc.rng_seed = cfg.model.rng_seed + static_cast<std::uint64_t>(r);
            mc.probabilistic = variant == Variant::uncertainty_aware;
            TrainConfig tc = cfg.train;
            tc.rng_seed = cfg.train.rng_seed + static_cast<std::uint64_t>(r);
            LossWeights w = cfg.loss;
            w.variant = variant;

            TrainResult res =
                train(train_scenes, val_scenes, mc, tc, cfg.physics, w);
            write_history_csv(
                (fs::path(out.run_dir) / ("history_" + to_string(variant) +
                                          "_seed" + std::to_string(r) + ".csv"))
                    .string(),
                res.history);
            const double iou = evaluate(res.params, val_scenes, mc, w).iou;
            row.per_seed_iou.push_back(iou);
            runs_csv << to_string(variant) << ',' << r << ','
                     << format_double(iou) << '\n';
            say(quiet, "ablation: " + to_string(variant) + " seed " +
                           std::to_string(r) + " IoU " + format_double(iou));
        }
        row.mean_iou = 0.0;
        for (double x : row.per_seed_iou) row.mean_iou += x;
        row.mean_iou /= repeats;
        row.stdev_iou = pop_stdev(row.per_seed_iou, row.mean_iou);
        row.cov = row.mean_iou > 0.0 ? row.stdev_iou / row.mean_iou : 0.0;
        out.rows.push_back(row);
    }
    const double base = out.rows.front().mean_iou;
    for (auto& row : out.rows) {
        row.rel_improvement = base > 0.0 ? (row.mean_iou - base) / base : 0.0;
    }

    std::ostringstream ss;
    ss << "variant,mean_iou,stdev_iou,cov,rel_improvement_vs_baseline\n";
    for (const auto& row : out.rows) {
        ss << to_string(row.variant) << ',' << format_double(row.mean_iou)
           << ',' << format_double(row.stdev_iou) << ','
           << format_double(row.cov) << ',' << format_double(row.rel_improvement)
           << '\n';
    }
    write_text((fs::path(out.run_dir) / "ablation_summary.csv").string(),
               ss.str());
    return out;
}

// ---------------------------------------------------------------------------

EnsembleSummary cmd_ensemble(const RunConfig& cfg, bool quiet) {
    EnsembleSummary out;
    out.run_dir = make_run_dir(cfg, "ensemble");
    auto [train_scenes, val_scenes] = build_suite(cfg);
    if (val_scenes.empty()) {
        throw std::invalid_argument("ensemble: needs validation scenes");
    }

    ModelConfig mcfg = cfg.model;
    mcfg.probabilistic = true;
    LossWeights w = cfg.loss;
    w.variant = Variant::uncertainty_aware;

    EnsembleRun run = run_ensemble(train_scenes, val_scenes, mcfg, cfg.train,
                                   cfg.physics, w, cfg.ensemble_members);
    for (std::size_t m = 0; m < run.member_params.size(); ++m) {
        ModelConfig mc = mcfg;
        mc.rng_seed = mcfg.rng_seed + static_cast<std::uint64_t>(m);
        save_checkpoint(run.member_params[m], mc,
                        (fs::path(out.run_dir) /
                         ("member" + std::to_string(m) + ".hpnn"))
                            .string());
        write_history_csv((fs::path(out.run_dir) /
                           ("history_member" + std::to_string(m) + ".csv"))
                              .string(),
                          run.histories[m]);
    }

    std::ostringstream ss;
    ss << "scene,mean_aleatoric,mean_epistemic,mean_total,epistemic_ratio\n";
    double pooled_epi = 0.0, pooled_tot = 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    long n_cells = 0;
    for (std::size_t s = 0; s < run.per_scene.size(); ++s) {
        Decomposition d = decompose(run.per_scene[s]);
        fs::path dir = fs::path(out.run_dir) / ("scene" + std::to_string(s));
        fs::create_directories(dir);
        write_grid((dir / "aleatoric.f32f").string(), d.aleatoric);
        write_grid((dir / "epistemic.f32f").string(), d.epistemic);
        write_grid((dir / "total.f32f").string(), d.total);
        write_grid((dir / "mu_star.f32f").string(), d.mu_star);

        for (int k = 0; k < d.total.size(); ++k) {
            pooled_epi += d.epistemic.v[k];
            pooled_tot += d.total.v[k];
            out.max_additivity_error = std::max(
                out.max_additivity_error,
                std::fabs(d.total.v[k] - (d.aleatoric.v[k] + d.epistemic.v[k])));
            const double a = d.aleatoric.v[k];
            const double b = val_scenes[s].noise_var_true.v[k];
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
            ++n_cells;
        }
        ss << s << ',' << format_double(d.aleatoric.mean()) << ','
           << format_double(d.epistemic.mean()) << ','
           << format_double(d.total.mean()) << ','
           << format_double(d.epistemic_ratio) << '\n';
        out.per_scene.push_back(std::move(d));
    }
    out.epistemic_ratio_pooled = pooled_tot > 0.0 ? pooled_epi / pooled_tot : 0.0;
    const double nd = static_cast<double>(n_cells);
    const double cov = sxy / nd - (sx / nd) * (sy / nd);
    const double vx = sxx / nd - (sx / nd) * (sx / nd);
    const double vy = syy / nd - (sy / nd) * (sy / nd);
    out.aleatoric_truth_pearson =
        vx > 0.0 && vy > 0.0 ? cov / std::sqrt(vx * vy) : 0.0;
    ss << "# pooled_epistemic_ratio="
       << format_double(out.epistemic_ratio_pooled)
       << " aleatoric_truth_pearson="
       << format_double(out.aleatoric_truth_pearson) << '\n';
    write_text((fs::path(out.run_dir) / "decomposition_summary.csv").string(),
               ss.str());
    say(quiet, "ensemble: epistemic ratio " +
                   format_double(out.epistemic_ratio_pooled) + ", pearson " +
                   format_double(out.aleatoric_truth_pearson));
    return out;
}

// ---------------------------------------------------------------------------

CalibrateSummary cmd_calibrate(const RunConfig& cfg, bool quiet) {
    CalibrateSummary out;
    out.run_dir = make_run_dir(cfg, "calibrate");
    auto [train_scenes, val_scenes] = build_suite(cfg);
    if (val_scenes.empty()) {
        throw std::invalid_argument("calibrate: needs validation scenes");
    }

    ModelConfig mcfg = cfg.model;
    mcfg.probabilistic = true;
    LossWeights w = cfg.loss;
    w.variant = Variant::uncertainty_aware;
    TrainResult res =
        train(train_scenes, val_scenes, mcfg, cfg.train, cfg.physics, w);
    save_checkpoint(res.params, mcfg,
                    (fs::path(out.run_dir) / "checkpoint.hpnn").string());
    write_history_csv((fs::path(out.run_dir) / "history.csv").string(),
                      res.history);

    std::vector<Field2D> sig, err;
    for (const auto& sc : val_scenes) {
        PredictionPair p = forward(res.params, sc.sar_vh, sc.dem, mcfg);
        Field2D e(sc.dem.rows, sc.dem.cols, 0.0, sc.dem.spacing);
        for (int k = 0; k < e.size(); ++k) {
            const double r = sc.depth_true.v[k] - p.mu.v[k];
            e.v[k] = r * r;
        }
        sig.push_back(std::move(p.sigma2));
        err.push_back(std::move(e));
    }
    out.model_report = make_calibration_report(sig, err, cfg.calib_bins);
    write_calibration_csv(
        (fs::path(out.run_dir) / "calibration_model.csv").string(),
        out.model_report);
    write_fit_csv((fs::path(out.run_dir) / "calibration_model_fit.csv").string(),
                  out.model_report.fit, out.model_report.degenerate);

    // Known-noise oracle: mu = truth + eta * sigma with sigma^2 mapped from
    // the true dB-domain variance into depth units.
    std::vector<Field2D> osig, oerr;
    for (std::size_t s = 0; s < val_scenes.size(); ++s) {
        const Scene& sc = val_scenes[s];
        Rng rng(cfg.scene.rng_seed + 7700000ULL + s);
        Field2D s2(sc.dem.rows, sc.dem.cols, 0.0, sc.dem.spacing);
        Field2D e2(sc.dem.rows, sc.dem.cols, 0.0, sc.dem.spacing);
        for (int k = 0; k < s2.size(); ++k) {
            s2.v[k] = kDepthPerDb * kDepthPerDb * sc.noise_var_true.v[k];
            const double noise = rng.normal() * std::sqrt(s2.v[k]);
            e2.v[k] = noise * noise;
        }
        osig.push_back(std::move(s2));
        oerr.push_back(std::move(e2));
    }
    out.oracle_report = make_calibration_report(osig, oerr, cfg.calib_bins);
    write_calibration_csv(
        (fs::path(out.run_dir) / "calibration_oracle.csv").string(),
        out.oracle_report);
    write_fit_csv(
        (fs::path(out.run_dir) / "calibration_oracle_fit.csv").string(),
        out.oracle_report.fit, out.oracle_report.degenerate);

    say(quiet, "calibrate: model slope " +
                   format_double(out.model_report.fit.slope) + " (R^2 " +
                   format_double(out.model_report.fit.r_squared) +
                   "), oracle slope " +
                   format_double(out.oracle_report.fit.slope));
    return out;
}

// ---------------------------------------------------------------------------

GradcheckSummary cmd_gradcheck(const RunConfig& cfg, bool quiet) {
    GradcheckSummary out;
    out.run_dir = make_run_dir(cfg, "gradcheck");

    SceneConfig scfg = cfg.scene;
    scfg.grid_size = 16;
    Scene scene = make_scene(scfg);

    ModelConfig mcfg;
    mcfg.width = 8;
    mcfg.modes = 4;
    mcfg.depth_levels = 2;
    mcfg.sigma_floor = cfg.model.sigma_floor;
    mcfg.rng_seed = cfg.model.rng_seed;

    PhysicsConfig pcfg = cfg.physics;
    const int epoch = pcfg.e_warm + pcfg.e_ramp;  // schedule saturated

    const Variant variants[] = {Variant::baseline_mse, Variant::stabilized_mse,
                                Variant::uncertainty_aware};
    constexpr int kSamples = 50;

    std::ostringstream detail;
    detail << "variant,param,index,analytic,numeric,rel_error\n";
    for (Variant variant : variants) {
        ModelConfig mc = mcfg;
        mc.probabilistic = variant == Variant::uncertainty_aware;
        LossWeights w = cfg.loss;
        w.variant = variant;

        ModelParams params = init_params(mc);
        StepResult step = loss_gradients(params, scene, epoch, mc, w, pcfg);

        // Deterministic sample of trainable scalar coordinates.
        std::vector<std::pair<std::string, long>> coords;
        for (const auto& [name, t] : params) {
            if (!is_trainable(name)) continue;
            for (long k = 0; k < t.numel(); ++k) coords.emplace_back(name, k);
        }
        Rng rng(mc.rng_seed + 12345);
        GradcheckSummary::Row row;
        row.variant = variant;
        for (int s = 0; s < kSamples; ++s) {
            const auto& [name, k] =
                coords[static_cast<std::size_t>(rng.below(coords.size()))];
            const double theta = params.at(name).v[k];
            const double h = std::max(1e-4 * std::fabs(theta), 1e-6);

            ModelParams pp = params;
            pp.at(name).v[k] = theta + h;
            const double lp =
                loss_components(pp, scene, epoch, mc, w, pcfg).total;
            pp.at(name).v[k] = theta - h;
            const double lm =
                loss_components(pp, scene, epoch, mc, w, pcfg).total;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = step.grads.at(name).v[k];
            const double rel = std::fabs(analytic - numeric) /
                               std::max({std::fabs(analytic),
                                         std::fabs(numeric), 1e-8});
            row.max_rel_error = std::max(row.max_rel_error, rel);
            ++row.checked;
            detail << to_string(variant) << ',' << name << ',' << k << ','
                   << format_double(analytic) << ',' << format_double(numeric)
                   << ',' << format_double(rel) << '\n';
        }
        out.rows.push_back(row);
        say(quiet, "gradcheck: " + to_string(variant) + " max rel error " +
                       format_double(row.max_rel_error));
    }
    out.pass = true;
    for (const auto& row : out.rows) {
        if (!(row.max_rel_error <= out.tolerance)) out.pass = false;
    }
    write_text((fs::path(out.run_dir) / "gradcheck.csv").string(),
               detail.str());
    say(quiet, std::string("gradcheck: ") + (out.pass ? "PASS" : "FAIL"));
    return out;
}

// ---------------------------------------------------------------------------

ReportSummary cmd_report(const RunConfig& cfg, bool quiet) {
    if (!fs::exists(cfg.output_dir)) {
        throw std::runtime_error("no runs found in '" + cfg.output_dir + "'");
    }
    // Gather first so the report directory itself is never a source.
    std::vector<fs::path> run_dirs;
    for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
        if (entry.is_directory()) run_dirs.push_back(entry.path());
    }
    std::sort(run_dirs.begin(), run_dirs.end());

    std::ostringstream curves, ablation, calibration, decomposition;
    curves << "run,file,epoch,data_loss,dice_loss,mass_loss,smooth_loss,"
              "physics_weight,total_loss,val_iou,val_rmse\n";
    int sources = 0;

    auto append_tagged = [&](std::ostringstream& os, const fs::path& file,
                             const std::string& run) {
        std::ifstream is(file);
        std::string line;
        bool first = true;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            if (first) {  // skip per-file header
                first = false;
                continue;
            }
            if (line[0] == '#') continue;
            os << run << ',' << file.filename().string() << ',' << line << '\n';
        }
    };

    for (const auto& dir : run_dirs) {
        const std::string run = dir.filename().string();
        bool used = false;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.rfind("history", 0) == 0 && name.ends_with(".csv")) {
                append_tagged(curves, entry.path(), run);
                used = true;
            } else if (name == "ablation_summary.csv") {
                if (ablation.tellp() == 0) {
                    ablation << "run,variant,mean_iou,stdev_iou,cov,"
                                "rel_improvement_vs_baseline\n";
                }
                append_tagged(ablation, entry.path(), run);
                used = true;
            } else if (name == "calibration_model.csv" ||
                       name == "calibration_oracle.csv") {
                if (calibration.tellp() == 0) {
                    calibration << "run,file,bin,mean_sigma2,mean_sq_err,sem,"
                                   "count\n";
                }
                append_tagged(calibration, entry.path(), run);
                used = true;
            } else if (name == "decomposition_summary.csv") {
                if (decomposition.tellp() == 0) {
                    decomposition << "run,scene,mean_aleatoric,mean_epistemic,"
                                     "mean_total,epistemic_ratio\n";
                }
                append_tagged(decomposition, entry.path(), run);
                used = true;
            }
        }
        if (used) ++sources;
    }
    if (sources == 0) {
        throw std::runtime_error("no runs found in '" + cfg.output_dir + "'");
    }

    ReportSummary out;
    out.sources = sources;
    out.run_dir = make_run_dir(cfg, "report");
    write_text((fs::path(out.run_dir) / "report_curves.csv").string(),
               curves.str());
    if (ablation.tellp() > 0) {
        write_text((fs::path(out.run_dir) / "report_ablation.csv").string(),
                   ablation.str());
    }
    if (calibration.tellp() > 0) {
        write_text((fs::path(out.run_dir) / "report_calibration.csv").string(),
                   calibration.str());
    }
    if (decomposition.tellp() > 0) {
        write_text(
            (fs::path(out.run_dir) / "report_decomposition.csv").string(),
            decomposition.str());
    }
    say(quiet, "report: aggregated " + std::to_string(sources) +
                   " run directories into " + out.run_dir);
    return out;
}

}  // namespace hydropinn::cli
