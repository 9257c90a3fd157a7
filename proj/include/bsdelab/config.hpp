#pragma once

// Experiment configuration: a strict JSON schema.  Unknown keys are rejected
// with the offending path -- silent typos in config files ("n_pahts") have
// burned enough CPU-days already.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "basis.hpp"
#include "bmo_constants.hpp"
#include "catalog.hpp"
#include "errors.hpp"
#include "time_grid.hpp"

namespace bsdelab {

// Defaults sit inside every validity window at once for N = 0.05 (where
// q* ~ 1.994, p* ~ 2.006): q < q* for the reverse-Holder row, p* < p <
// p_upper for the Y bound, p < z_q for the Holder split of the Z bound.
// The Z split needs its own partner exponent -- q < q* < 2 < p* < p rules
// out reusing q there.
struct ConstantsParams {
    double N = 0.05;
    double T = 1.0;
    double alpha = 0.5;
    double q = 1.5;
    double p = 2.5;
    double p_upper = 3.0;
    double z_q = 4.0;
    double data_norm = 1.0;
};

struct ExperimentConfig {
    std::string model_id = "brownian-1d";
    std::string driver_id = "pure-quadratic-gamma";
    double t0 = 0.0;
    double T = 1.0;
    int K = 50;
    int n_paths = 10000;
    uint64_t seed = 12345;
    std::vector<double> x0; // empty -> zero vector of model dimension
    std::string task;       // optional; a CLI subcommand overrides
    std::string outputs;    // optional output directory; --out overrides
    BasisSpec basis;
    ConstantsParams constants;

    TimeGrid grid() const { return make_uniform_grid(t0, T, K); }
};

inline const std::set<std::string>& known_tasks() {
    static const std::set<std::string> t = {
        "simulate",  "solve",       "gradient",
        "bmo",       "constants",   "verify-mild",
        "verify-identification"};
    return t;
}

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
    if (!obj.is_object())
        throw config_error("config: expected object at '" + path + "'");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw config_error("config: unknown key '" + path + it.key() + "'");
    }
}

template <class T>
T get_or(const nlohmann::json& obj, const std::string& key,
         const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: bad value type at '" + path + key + "'");
    }
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    detail::require_keys(j, "", {"model", "driver", "grid", "mc", "basis",
                                 "x0", "task", "outputs", "constants_params"});
    cfg.model_id = detail::get_or<std::string>(j, "model", "", cfg.model_id);
    cfg.driver_id = detail::get_or<std::string>(j, "driver", "", cfg.driver_id);
    cfg.task = detail::get_or<std::string>(j, "task", "", cfg.task);
    cfg.outputs = detail::get_or<std::string>(j, "outputs", "", cfg.outputs);
    if (!cfg.task.empty() && !known_tasks().count(cfg.task))
        throw config_error("config: unknown task '" + cfg.task + "'");

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::require_keys(g, "grid.", {"t0", "T", "K"});
        cfg.t0 = detail::get_or<double>(g, "t0", "grid.", cfg.t0);
        cfg.T = detail::get_or<double>(g, "T", "grid.", cfg.T);
        cfg.K = detail::get_or<int>(g, "K", "grid.", cfg.K);
    }
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        detail::require_keys(m, "mc.", {"n_paths", "seed"});
        cfg.n_paths = detail::get_or<int>(m, "n_paths", "mc.", cfg.n_paths);
        cfg.seed = detail::get_or<uint64_t>(m, "seed", "mc.", cfg.seed);
    }
    if (j.contains("basis")) {
        const auto& b = j.at("basis");
        detail::require_keys(b, "basis.", {"family", "degree", "ridge"});
        cfg.basis.family =
            detail::get_or<std::string>(b, "family", "basis.", cfg.basis.family);
        cfg.basis.degree =
            detail::get_or<int>(b, "degree", "basis.", cfg.basis.degree);
        cfg.basis.ridge =
            detail::get_or<double>(b, "ridge", "basis.", cfg.basis.ridge);
    }
    if (j.contains("x0")) {
        try {
            cfg.x0 = j.at("x0").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw config_error("config: bad value type at 'x0'");
        }
    }
    if (j.contains("constants_params")) {
        const auto& c = j.at("constants_params");
        detail::require_keys(c, "constants_params.",
                             {"N", "T", "alpha", "q", "p", "p_upper", "z_q",
                              "data_norm"});
        auto& cp = cfg.constants;
        cp.N = detail::get_or<double>(c, "N", "constants_params.", cp.N);
        cp.T = detail::get_or<double>(c, "T", "constants_params.", cp.T);
        cp.alpha = detail::get_or<double>(c, "alpha", "constants_params.",
                                          cp.alpha);
        cp.q = detail::get_or<double>(c, "q", "constants_params.", cp.q);
        cp.p = detail::get_or<double>(c, "p", "constants_params.", cp.p);
        cp.p_upper = detail::get_or<double>(c, "p_upper", "constants_params.",
                                            cp.p_upper);
        cp.z_q = detail::get_or<double>(c, "z_q", "constants_params.", cp.z_q);
        cp.data_norm = detail::get_or<double>(c, "data_norm",
                                              "constants_params.", cp.data_norm);
    }

    // semantic validation
    if (!(cfg.T > cfg.t0)) throw config_error("config: need grid.T > grid.t0");
    if (cfg.K < 2) throw config_error("config: need grid.K >= 2");
    if (cfg.n_paths < 100) throw config_error("config: need mc.n_paths >= 100");
    if (cfg.basis.family != "hermite" && cfg.basis.family != "monomial")
        throw config_error("config: basis.family must be hermite|monomial");
    if (cfg.basis.degree < 1 || cfg.basis.degree > 6)
        throw config_error("config: basis.degree must lie in [1,6]");
    if (cfg.basis.ridge < 0)
        throw config_error("config: basis.ridge must be >= 0");
    // catalog membership (throws catalog_error-style invalid_argument itself,
    // but we want the config: prefix and the list of valid ids)
    {
        const auto models = model_catalog();
        bool found = false;
        for (const auto& id : models) found = found || id == cfg.model_id;
        if (!found) {
            std::string msg = "config: unknown model '" + cfg.model_id +
                              "'; known:";
            for (const auto& id : models) msg += " " + id;
            throw config_error(msg);
        }
        const auto drivers = driver_catalog();
        found = false;
        for (const auto& id : drivers) found = found || id == cfg.driver_id;
        if (!found) {
            std::string msg = "config: unknown driver '" + cfg.driver_id +
                              "'; known:";
            for (const auto& id : drivers) msg += " " + id;
            throw config_error(msg);
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: JSON parse failure in '" + path +
                           "': " + e.what());
    }
    return parse_config(j);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["model"] = cfg.model_id;
    j["driver"] = cfg.driver_id;
    j["grid"] = {{"t0", cfg.t0}, {"T", cfg.T}, {"K", cfg.K}};
    j["mc"] = {{"n_paths", cfg.n_paths}, {"seed", cfg.seed}};
    j["basis"] = {{"family", cfg.basis.family},
                  {"degree", cfg.basis.degree},
                  {"ridge", cfg.basis.ridge}};
    if (!cfg.x0.empty()) j["x0"] = cfg.x0;
    if (!cfg.task.empty()) j["task"] = cfg.task;
    if (!cfg.outputs.empty()) j["outputs"] = cfg.outputs;
    j["constants_params"] = {{"N", cfg.constants.N},
                             {"T", cfg.constants.T},
                             {"alpha", cfg.constants.alpha},
                             {"q", cfg.constants.q},
                             {"p", cfg.constants.p},
                             {"p_upper", cfg.constants.p_upper},
                             {"z_q", cfg.constants.z_q},
                             {"data_norm", cfg.constants.data_norm}};
    return j;
}

} // namespace bsdelab
