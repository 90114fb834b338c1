#pragma once

// Plain-text key = value configuration for the simulation lab.
// '#' starts a comment; blank lines are ignored; unknown keys are an error.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "futvol/errors.hpp"
#include "futvol/futures_curve.hpp"
#include "futvol/sim_lab.hpp"

namespace futvol {

struct LabConfig {
    ModelSpec model;
    VanillaSpec option;
    bool atm_strike = true;  ///< strike = h0 forward of the model-implied curve
    double season_amp = 0.0;
    double season_phase = 0.0;
    std::string vol_map = "exp";
    McBudget budget;
    std::uint64_t seed = 20240601;
    std::vector<double> ladder{0.25, 0.05, 0.01};  ///< eps = delta per rung

    LabConfig() {
        option.T0 = 0.5;
        option.T = 0.5 + 1.0 / 12.0;
        model.nu = 0.05;
        model.nu_z = 0.5;
        model.m_y = -model.nu * model.nu;
        model.y0 = model.m_y;
    }

    /// The option with the ATM strike resolved against the model's h0 forward.
    [[nodiscard]] VanillaSpec resolved_option() const {
        VanillaSpec v = option;
        v.rate = model.rate;
        if (atm_strike) {
            const auto mg = model_group_params(model);
            v.strike = h0(0.0, model.u0, mg.curve(model), v.T);
        }
        return v;
    }

    [[nodiscard]] std::vector<LadderRung> rungs() const {
        std::vector<LadderRung> out;
        for (double e : ladder) out.push_back({e, e});
        return out;
    }
};

namespace detail {

inline std::string_view cfg_trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double cfg_double(std::string_view v, const std::string& key, std::size_t line) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
        throw ParseError("config: '" + key + "' expects a number, got '" + std::string(v) + "'", line);
    }
    return x;
}

template <class Int>
Int cfg_int(std::string_view v, const std::string& key, std::size_t line) {
    Int x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
        throw ParseError("config: '" + key + "' expects an integer, got '" + std::string(v) + "'", line);
    }
    return x;
}

inline bool cfg_bool(std::string_view v, const std::string& key, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("config: '" + key + "' expects true or false", line);
}

inline std::vector<double> cfg_list(std::string_view v, const std::string& key, std::size_t line) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(cfg_double(cfg_trim(v.substr(start, comma - start)), key, line));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

/// Applies one key = value assignment; `line` is used in error messages only.
inline void apply_config_value(LabConfig& c, const std::string& key, std::string_view v,
                               std::size_t line = 0) {
    using detail::cfg_double;
    auto num = [&] { return cfg_double(v, key, line); };
    ModelSpec& m = c.model;
    if (key == "kappa") m.kappa = num();
    else if (key == "m") m.m = num();
    else if (key == "u0") m.u0 = num();
    else if (key == "season_amp") c.season_amp = num();
    else if (key == "season_phase") c.season_phase = num();
    else if (key == "rate") m.rate = num();
    else if (key == "eps") m.eps = num();
    else if (key == "nu") m.nu = num();
    else if (key == "m_y") m.m_y = num();
    else if (key == "y0") m.y0 = num();
    else if (key == "y0_stationary") m.y0_stationary = detail::cfg_bool(v, key, line);
    else if (key == "delta") m.delta = num();
    else if (key == "kappa_z") m.kappa_z = num();
    else if (key == "m_z") m.m_z = num();
    else if (key == "nu_z") m.nu_z = num();
    else if (key == "z0") m.z0 = num();
    else if (key == "vol_map") {
        if (v != "exp" && v != "level") throw ParseError("config: vol_map must be exp or level", line);
        c.vol_map = std::string(v);
    } else if (key == "eta_cap") m.eta_cap_multiple = num();
    else if (key == "rho1") m.rho1 = num();
    else if (key == "rho2") m.rho2 = num();
    else if (key == "rho12") m.rho12 = num();
    else if (key == "style") {
        if (v == "call") c.option.style = OptionStyle::Call;
        else if (v == "put") c.option.style = OptionStyle::Put;
        else throw ParseError("config: style must be call or put", line);
    } else if (key == "t0") c.option.T0 = num();
    else if (key == "t") c.option.T = num();
    else if (key == "strike") {
        if (v == "atm") {
            c.atm_strike = true;
        } else {
            c.atm_strike = false;
            c.option.strike = num();
        }
    } else if (key == "outer_paths") c.budget.outer_paths = detail::cfg_int<long>(v, key, line);
    else if (key == "inner_paths") c.budget.inner_paths = detail::cfg_int<long>(v, key, line);
    else if (key == "steps_per_eps") c.budget.steps_per_eps = num();
    else if (key == "workers") c.budget.workers = detail::cfg_int<unsigned>(v, key, line);
    else if (key == "seed") c.seed = detail::cfg_int<std::uint64_t>(v, key, line);
    else if (key == "ladder") c.ladder = detail::cfg_list(v, key, line);
    else throw ParseError("config: unknown key '" + key + "'", line);
}

/// Rebuilds the callable members (vol map, seasonality) and checks the result.
inline void finalize_config(LabConfig& c) {
    c.model.eta = c.vol_map == "level" ? level_vol_map() : exponential_vol_map();
    if (c.season_amp != 0.0) {
        const double a = c.season_amp, ph = c.season_phase;
        c.model.seasonality = [a, ph](double t) {
            return a * std::sin(2.0 * std::numbers::pi * (t - ph));
        };
    } else {
        c.model.seasonality = nullptr;
    }
    c.model.validate();
    c.option.rate = c.model.rate;
    detail::require(c.option.T0 > 0.0 && c.option.T0 <= c.option.T, "config: require 0 < t0 <= t");
    detail::require(c.atm_strike || c.option.strike > 0.0, "config: strike must be > 0");
    detail::require(c.budget.outer_paths >= 2, "config: outer_paths >= 2");
    detail::require(c.budget.inner_paths >= 2 && c.budget.inner_paths % 2 == 0,
                    "config: inner_paths must be even and >= 2");
    detail::require(c.budget.steps_per_eps >= 50.0, "config: steps_per_eps >= 50");
    detail::require(!c.ladder.empty(), "config: empty ladder");
    for (double e : c.ladder) detail::require(e > 0.0 && std::isfinite(e), "config: ladder values > 0");
}

[[nodiscard]] inline LabConfig parse_lab_config(std::istream& in) {
    LabConfig c;
    std::string raw;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view s = raw;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::cfg_trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ParseError("config: expected key = value", lineno);
        const std::string key(detail::cfg_trim(s.substr(0, eq)));
        const std::string_view val = detail::cfg_trim(s.substr(eq + 1));
        if (key.empty()) throw ParseError("config: empty key", lineno);
        if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
            throw ParseError("config: duplicate key '" + key + "' (first on line " +
                                 std::to_string(it->second) + ")",
                             lineno);
        }
        apply_config_value(c, key, val, lineno);
    }
    finalize_config(c);
    return c;
}

[[nodiscard]] inline LabConfig load_lab_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("config: cannot open " + path.string());
    return parse_lab_config(in);
}

}  // namespace futvol
