/// @file config.hpp
/// @brief Run configuration: the union of every module config, addressable
/// as `section.key = value` lines in a text file. Parsing is strict — an
/// unknown key or malformed value is an error naming the line.

#pragma once

#include <stdexcept>
#include <string>

#include "hydropinn/losses.hpp"
#include "hydropinn/model.hpp"
#include "hydropinn/physics.hpp"
#include "hydropinn/scene.hpp"
#include "hydropinn/train.hpp"

namespace hydropinn {

enum class Experiment {
    synth,
    train,
    shock,
    ablation,
    ensemble,
    calibrate,
    gradcheck,
    report
};

[[nodiscard]] std::string to_string(Experiment e);
[[nodiscard]] Experiment experiment_from_string(const std::string& s);

struct RunConfig {
    SceneConfig scene;
    ModelConfig model;
    TrainConfig train;
    PhysicsConfig physics;
    LossWeights loss;

    std::string output_dir = "runs";
    Experiment experiment = Experiment::train;
    int train_scenes = 24;
    int val_scenes = 8;
    int repeats = 0;           // 0: per-command default (shock 5, ablation 3)
    int ensemble_members = 3;
    int calib_bins = 20;
    int synth_count = 3;
};

/// Thrown with messages of the form "<source>:<line>: <what>".
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[nodiscard]] RunConfig parse_config(const std::string& path);
[[nodiscard]] RunConfig parse_config_text(const std::string& text,
                                          const std::string& source_name);

/// Every key with its resolved value; re-parses to an identical RunConfig.
[[nodiscard]] std::string echo_config(const RunConfig& cfg);

}  // namespace hydropinn
