#include "hydropinn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hydropinn/util.hpp"

namespace hydropinn {

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::synth: return "synth";
        case Experiment::train: return "train";
        case Experiment::shock: return "shock";
        case Experiment::ablation: return "ablation";
        case Experiment::ensemble: return "ensemble";
        case Experiment::calibrate: return "calibrate";
        case Experiment::gradcheck: return "gradcheck";
        case Experiment::report: return "report";
    }
    return "unknown";
}

Experiment experiment_from_string(const std::string& s) {
    if (s == "synth") return Experiment::synth;
    if (s == "train") return Experiment::train;
    if (s == "shock") return Experiment::shock;
    if (s == "ablation") return Experiment::ablation;
    if (s == "ensemble") return Experiment::ensemble;
    if (s == "calibrate") return Experiment::calibrate;
    if (s == "gradcheck") return Experiment::gradcheck;
    if (s == "report") return Experiment::report;
    throw std::invalid_argument("unknown experiment '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Setter {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& v) {
    T out{};
    const std::string t = trim(v);
    auto res = std::from_chars(t.data(), t.data() + t.size(), out);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw std::invalid_argument("malformed value '" + v + "'");
    }
    return out;
}

template <>
double parse_number<double>(const std::string& v) {
    const std::string t = trim(v);
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed value '" + v + "'");
    }
    if (pos != t.size()) {
        throw std::invalid_argument("malformed value '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "on") return true;
    if (t == "false" || t == "0" || t == "off") return false;
    throw std::invalid_argument("malformed value '" + v + "' (expected bool)");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;

#define HP_INT(key, field)                                                   \
    t[key] = Setter{[](RunConfig& c, const std::string& v) {                 \
                        c.field = parse_number<int>(v);                      \
                    },                                                       \
                    [](const RunConfig& c) { return std::to_string(c.field); }}
#define HP_U64(key, field)                                                   \
    t[key] = Setter{[](RunConfig& c, const std::string& v) {                 \
                        c.field = parse_number<std::uint64_t>(v);            \
                    },                                                       \
                    [](const RunConfig& c) { return std::to_string(c.field); }}
#define HP_DBL(key, field)                                                   \
    t[key] = Setter{[](RunConfig& c, const std::string& v) {                 \
                        c.field = parse_number<double>(v);                   \
                    },                                                       \
                    [](const RunConfig& c) { return format_double(c.field); }}
#define HP_BOOL(key, field)                                                  \
    t[key] = Setter{[](RunConfig& c, const std::string& v) {                 \
                        c.field = parse_bool(v);                             \
                    },                                                       \
                    [](const RunConfig& c) { return bool_str(c.field); }}

        HP_INT("scene.grid_size", scene.grid_size);
        HP_DBL("scene.spacing", scene.spacing);
        HP_DBL("scene.terrain_amplitude", scene.terrain_amplitude);
        HP_DBL("scene.terrain_correlation_length",
               scene.terrain_correlation_length);
        HP_DBL("scene.wse_level", scene.wse_level);
        HP_INT("scene.seed_count", scene.seed_count);
        HP_DBL("scene.looks_land", scene.looks_land);
        HP_DBL("scene.looks_water", scene.looks_water);
        HP_DBL("scene.shadow_azimuth", scene.shadow_azimuth);
        HP_DBL("scene.backscatter_land_db", scene.backscatter_land_db);
        HP_DBL("scene.backscatter_water_db", scene.backscatter_water_db);
        HP_U64("scene.rng_seed", scene.rng_seed);

        HP_INT("model.in_channels", model.in_channels);
        HP_INT("model.width", model.width);
        HP_INT("model.modes", model.modes);
        HP_INT("model.depth_levels", model.depth_levels);
        HP_BOOL("model.probabilistic", model.probabilistic);
        HP_DBL("model.sigma_floor", model.sigma_floor);
        HP_U64("model.rng_seed", model.rng_seed);

        HP_DBL("train.lr_max", train.lr_max);
        HP_DBL("train.lr_min", train.lr_min);
        HP_DBL("train.weight_decay", train.weight_decay);
        HP_DBL("train.beta1", train.beta1);
        HP_DBL("train.beta2", train.beta2);
        HP_DBL("train.adam_eps", train.adam_eps);
        HP_INT("train.epochs", train.epochs);
        HP_INT("train.batch_size", train.batch_size);
        HP_INT("train.t0", train.t0);
        HP_INT("train.t_mult", train.t_mult);
        HP_INT("train.early_stop_patience", train.early_stop_patience);
        HP_U64("train.rng_seed", train.rng_seed);

        HP_DBL("physics.manning_n", physics.manning_n);
        HP_INT("physics.e_warm", physics.e_warm);
        HP_INT("physics.e_ramp", physics.e_ramp);
        HP_DBL("physics.lambda_max", physics.lambda_max);
        HP_DBL("physics.gate_epsilon", physics.gate_epsilon);
        HP_DBL("physics.slope_floor", physics.slope_floor);
        HP_BOOL("physics.use_predicted_mask", physics.use_predicted_mask);
        t["physics.gating"] = Setter{
            [](RunConfig& c, const std::string& v) {
                const std::string s = trim(v);
                if (s == "none") c.physics.gating = Gating::none;
                else if (s == "inverse_variance")
                    c.physics.gating = Gating::inverse_variance;
                else
                    throw std::invalid_argument("malformed value '" + v +
                                                "' (expected gating)");
            },
            [](const RunConfig& c) {
                return std::string(c.physics.gating == Gating::none
                                       ? "none"
                                       : "inverse_variance");
            }};

        HP_DBL("loss.w_nll", loss.w_nll);
        HP_DBL("loss.w_dice", loss.w_dice);
        HP_DBL("loss.tau_w", loss.tau_w);
        HP_DBL("loss.temp", loss.temp);
        HP_DBL("loss.dice_eps", loss.dice_eps);
        t["loss.variant"] = Setter{
            [](RunConfig& c, const std::string& v) {
                c.loss.variant = variant_from_string(trim(v));
            },
            [](const RunConfig& c) { return to_string(c.loss.variant); }};

        t["run.output_dir"] = Setter{
            [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); },
            [](const RunConfig& c) { return c.output_dir; }};
        t["run.experiment"] = Setter{
            [](RunConfig& c, const std::string& v) {
                c.experiment = experiment_from_string(trim(v));
            },
            [](const RunConfig& c) { return to_string(c.experiment); }};
        HP_INT("run.train_scenes", train_scenes);
        HP_INT("run.val_scenes", val_scenes);
        HP_INT("run.repeats", repeats);
        HP_INT("run.ensemble_members", ensemble_members);
        HP_INT("run.calib_bins", calib_bins);
        HP_INT("run.synth_count", synth_count);

#undef HP_INT
#undef HP_U64
#undef HP_DBL
#undef HP_BOOL
        return t;
    }();
    return table;
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& source_name) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    const auto& table = key_table();
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": expected 'section.key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = table.find(key);
        if (it == table.end()) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        }
        try {
            it->second.set(cfg, value);
        } catch (const std::exception& e) {
            throw ConfigError(source_name + ":" + std::to_string(lineno) +
                              ": " + e.what());
        }
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string echo_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& [key, setter] : key_table()) {
        os << key << " = " << setter.get(cfg) << "\n";
    }
    return os.str();
}

}  // namespace hydropinn
