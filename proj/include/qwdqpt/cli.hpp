// Copyright 2026 The qwdqpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qwdqpt/analysis.hpp"
#include "qwdqpt/errors.hpp"
#include "qwdqpt/experiment.hpp"
#include "qwdqpt/floquet.hpp"
#include "qwdqpt/quench.hpp"
#include "qwdqpt/svg.hpp"

namespace qwdqpt::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_physics = 3, exit_io = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physics failure tagged with the module that raised it.
class ModuleError : public PhysicsError {
public:
    ModuleError(std::string module, const PhysicsError& e) : PhysicsError(e.kind(), e.what()), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

template <class Fn>
auto in_module(const char* module, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ModuleError&) {
        throw;
    } catch (const PhysicsError& e) {
        throw ModuleError(module, e);
    }
}

enum class Command { phase_diagram, quench, dtop, error_mc, reproduce_figure };

inline std::string_view to_string(Command c) {
    switch (c) {
        case Command::phase_diagram: return "phase-diagram";
        case Command::quench: return "quench";
        case Command::dtop: return "dtop";
        case Command::error_mc: return "error-mc";
        case Command::reproduce_figure: return "reproduce-figure";
    }
    return "unknown";
}

inline Command parse_command(std::string_view s) {
    for (auto c : {Command::phase_diagram, Command::quench, Command::dtop, Command::error_mc, Command::reproduce_figure})
        if (to_string(c) == s) return c;
    throw ConfigError("unknown command '" + std::string(s) + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view key, std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError(std::string(key) + ": not a number: '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_unsigned(std::string_view key, std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError(std::string(key) + ": not a non-negative integer: '" + std::string(s) + "'");
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(std::string(key) + ": not a boolean: '" + std::string(s) + "'");
}

}  // namespace detail

/// Angle given as a multiple of pi: "-1/2", "3/8", "0.25" or "1".
inline double parse_pi_multiple(std::string_view s) {
    s = detail::trim(s);
    if (s.empty()) throw ConfigError("empty angle");
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return detail::parse_double("angle", s) * kPi;
    const double num = detail::parse_double("angle", s.substr(0, slash));
    const double den = detail::parse_double("angle", s.substr(slash + 1));
    if (den == 0.0) throw ConfigError("angle: zero denominator in '" + std::string(s) + "'");
    return num / den * kPi;
}

inline const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"fig2a", "fig2b", "fig3", "fig4a", "fig4b",
                                              "mixed-p07", "mixed-p09", "s1", "s2", "s3"};
    return ids;
}

struct RunConfig {
    Command command = Command::quench;
    std::string figure;
    CoinAngles initial{kPi / 4, -kPi / 2};
    CoinAngles final_angles{-kPi / 2, 3 * kPi / 8};
    double p = 1.0;
    double loss = 0.0;
    std::size_t kpoints = 0;  // 0: command default
    std::size_t resolution = 64;
    AngleRange theta1_range;
    AngleRange theta2_range;
    double t_max = 7.0;
    double dt = 0.01;
    std::size_t dtop_subgrid = kDefaultDtopSubgrid;
    ErrorModel error;
    std::vector<Quantity> quantities{Quantity::rate_function, Quantity::dtop};
    std::size_t mc_kpoints = 512;
    bool error_bars = true;
    std::string out_dir = "out";
    std::size_t threads = 1;

    std::size_t effective_kpoints() const {
        if (kpoints != 0) return kpoints;
        return command == Command::phase_diagram ? 256 : kDefaultInvariantGrid;
    }

    QuenchSpec spec() const {
        try {
            return in_module("quench-engine", [&] { return QuenchSpec::make(initial, final_angles, p, loss); });
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

inline std::vector<Quantity> parse_quantities(std::string_view s) {
    std::vector<Quantity> out;
    while (!s.empty()) {
        const auto comma = s.find(',');
        const auto item = detail::trim(s.substr(0, comma));
        if (item == "rate_function") out.push_back(Quantity::rate_function);
        else if (item == "dtop") out.push_back(Quantity::dtop);
        else if (item == "pbar") out.push_back(Quantity::pbar);
        else if (!item.empty()) throw ConfigError("quantities: unknown quantity '" + std::string(item) + "'");
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError("quantities: empty list");
    return out;
}

/// Applies one key=value setting.
inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    key = detail::trim(key);
    value = detail::trim(value);
    auto size = [&] { return static_cast<std::size_t>(detail::parse_unsigned(key, value)); };
    auto real = [&] { return detail::parse_double(key, value); };
    if (key == "command") c.command = parse_command(value);
    else if (key == "figure") c.figure = std::string(value);
    else if (key == "initial_theta1") c.initial.theta1 = parse_pi_multiple(value);
    else if (key == "initial_theta2") c.initial.theta2 = parse_pi_multiple(value);
    else if (key == "theta1") c.final_angles.theta1 = parse_pi_multiple(value);
    else if (key == "theta2") c.final_angles.theta2 = parse_pi_multiple(value);
    else if (key == "theta1_min") c.theta1_range.min = parse_pi_multiple(value);
    else if (key == "theta1_max") c.theta1_range.max = parse_pi_multiple(value);
    else if (key == "theta2_min") c.theta2_range.min = parse_pi_multiple(value);
    else if (key == "theta2_max") c.theta2_range.max = parse_pi_multiple(value);
    else if (key == "p") c.p = real();
    else if (key == "loss") c.loss = real();
    else if (key == "kpoints") c.kpoints = size();
    else if (key == "resolution") c.resolution = size();
    else if (key == "t_max") c.t_max = real();
    else if (key == "dt") c.dt = real();
    else if (key == "dtop_subgrid") c.dtop_subgrid = size();
    else if (key == "wp_angle_tol") c.error.wp_angle_tol = real();
    else if (key == "path_loss_tol") c.error.path_loss_tol = real();
    else if (key == "total_coincidences") c.error.total_coincidences = real();
    else if (key == "dephasing_eta") c.error.dephasing_eta = real();
    else if (key == "mc_samples") c.error.mc_samples = size();
    else if (key == "seed") c.error.seed = detail::parse_unsigned(key, value);
    else if (key == "quantities") c.quantities = parse_quantities(value);
    else if (key == "mc_kpoints") c.mc_kpoints = size();
    else if (key == "error_bars") c.error_bars = detail::parse_bool(key, value);
    else if (key == "out") c.out_dir = std::string(value);
    else if (key == "threads") c.threads = size();
    else throw ConfigError("unknown key '" + std::string(key) + "'");
}

/// Flat key=value lines; '#' starts a comment.
inline void apply_key_value(RunConfig& c, std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
    }
}

/// JSON object with the same keys; numbers, strings and booleans accepted.
inline void apply_json(RunConfig& c, std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("JSON config must be an object");
    for (const auto& [key, v] : j.items()) {
        if (v.is_string()) apply_setting(c, key, v.get<std::string>());
        else if (v.is_boolean()) apply_setting(c, key, v.get<bool>() ? "true" : "false");
        else if (v.is_number_unsigned() || v.is_number_integer()) apply_setting(c, key, v.dump());
        else if (v.is_number_float()) {
            std::ostringstream os;
            os << std::setprecision(17) << v.get<double>();
            apply_setting(c, key, os.str());
        } else if (v.is_array() && key == "quantities") {
            std::string joined;
            for (const auto& q : v) joined += (joined.empty() ? "" : ",") + q.get<std::string>();
            apply_setting(c, key, joined);
        } else {
            throw ConfigError("unsupported JSON value for '" + key + "'");
        }
    }
}

inline void apply_config_text(RunConfig& c, std::string_view text) {
    const auto t = detail::trim(text);
    if (!t.empty() && t.front() == '{') apply_json(c, t);
    else apply_key_value(c, text);
}

inline void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(c, ss.str());
}

inline void validate(const RunConfig& c) {
    if (c.command == Command::reproduce_figure) {
        if (c.figure.empty()) throw ConfigError("reproduce-figure needs a figure id");
        const auto& ids = figure_ids();
        if (std::find(ids.begin(), ids.end(), c.figure) == ids.end())
            throw ConfigError("unknown figure id '" + c.figure + "'");
    }
    const std::size_t k = c.effective_kpoints();
    if (k < 16 || k % 2 != 0) throw ConfigError("kpoints must be even and >= 16");
    if (c.mc_kpoints < 16 || c.mc_kpoints % 2 != 0) throw ConfigError("mc_kpoints must be even and >= 16");
    if (c.resolution < 32) throw ConfigError("resolution must be >= 32");
    if (!(c.t_max >= 1.0)) throw ConfigError("t_max must be >= 1");
    if (!(c.dt > 0.0) || c.dt > c.t_max) throw ConfigError("dt must be in (0, t_max]");
    if (c.dtop_subgrid < 16) throw ConfigError("dtop_subgrid must be >= 16");
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    if (c.out_dir.empty()) throw ConfigError("output directory must not be empty");
    if (c.error.mc_samples < 100) throw ConfigError("mc_samples must be >= 100");
    try {
        c.error.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(c.p >= 0.0 && c.p <= 1.0)) throw ConfigError("p must be in [0, 1]");
    if (!(c.loss >= 0.0 && c.loss < 1.0)) throw ConfigError("loss must be in [0, 1)");
    if (c.loss > 0.0 && c.p != 1.0) throw ConfigError("non-unitary quenches need p = 1");
}

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    json q = json::array();
    for (auto x : c.quantities) q.push_back(std::string(to_string(x)));
    return json{{"command", std::string(to_string(c.command))},
                {"figure", c.figure},
                {"initial_theta1_over_pi", c.initial.theta1 / kPi},
                {"initial_theta2_over_pi", c.initial.theta2 / kPi},
                {"theta1_over_pi", c.final_angles.theta1 / kPi},
                {"theta2_over_pi", c.final_angles.theta2 / kPi},
                {"p", c.p},
                {"loss", c.loss},
                {"kpoints", c.effective_kpoints()},
                {"resolution", c.resolution},
                {"theta1_range_over_pi", {c.theta1_range.min / kPi, c.theta1_range.max / kPi}},
                {"theta2_range_over_pi", {c.theta2_range.min / kPi, c.theta2_range.max / kPi}},
                {"t_max", c.t_max},
                {"dt", c.dt},
                {"dtop_subgrid", c.dtop_subgrid},
                {"wp_angle_tol", c.error.wp_angle_tol},
                {"path_loss_tol", c.error.path_loss_tol},
                {"total_coincidences", c.error.total_coincidences},
                {"dephasing_eta", c.error.dephasing_eta},
                {"mc_samples", c.error.mc_samples},
                {"seed", c.error.seed},
                {"quantities", q},
                {"mc_kpoints", c.mc_kpoints},
                {"error_bars", c.error_bars},
                {"threads", c.threads}};
}

// ---------------------------------------------------------------- presets

struct PresetPanel {
    std::string id;
    std::string title;
    QuenchSpec spec;
};

struct Preset {
    std::string id;
    std::vector<PresetPanel> panels;
    bool measured = false;  // figure shows emulated data points with error bars
};

inline Preset preset(std::string_view id) {
    const CoinAngles initial{kPi / 4, -kPi / 2};
    const CoinAngles pure_final{-kPi / 2, 3 * kPi / 8};
    const double l = 0.36;
    const double xi = std::acos(1.0 / LossParameters::from_loss(l).alpha);
    auto make = [&](CoinAngles f, double p = 1.0, double loss = 0.0) { return QuenchSpec::make(initial, f, p, loss); };
    const QuenchSpec fig2a = make(pure_final);
    const QuenchSpec fig2b = make({-kPi / 2, kPi / 4});
    const QuenchSpec fig3 = make({-kPi / 16, -3 * kPi / 16});
    const QuenchSpec fig4a = make({-kPi / 3, kPi / 5}, 1.0, l);
    const QuenchSpec fig4b = make({-kPi / 2, (kPi - xi) / 2}, 1.0, l);
    const QuenchSpec p09 = make(pure_final, 0.9);
    const QuenchSpec p07 = make(pure_final, 0.7);

    Preset p;
    p.id = std::string(id);
    if (id == "fig2a") p.panels = {{"fig2a", "theta_f = (-pi/2, 3pi/8)", fig2a}};
    else if (id == "fig2b") p.panels = {{"fig2b", "theta_f = (-pi/2, pi/4)", fig2b}};
    else if (id == "fig3") p.panels = {{"fig3", "theta_f = (-pi/16, -3pi/16)", fig3}};
    else if (id == "fig4a") p.panels = {{"fig4a", "l = 0.36, theta_f = (-pi/3, pi/5)", fig4a}};
    else if (id == "fig4b") p.panels = {{"fig4b", "l = 0.36, PT broken", fig4b}};
    else if (id == "mixed-p09") p.panels = {{"mixed-p09", "p = 0.9", p09}};
    else if (id == "mixed-p07") p.panels = {{"mixed-p07", "p = 0.7", p07}};
    else if (id == "s1") p.panels = {{"s1", "pure state, theta_f = (-pi/2, 3pi/8)", fig2a}};
    else if (id == "s2") p.panels = {{"s2_p09", "p = 0.9", p09}, {"s2_p07", "p = 0.7", p07}};
    else if (id == "s3") p.panels = {{"s3_unbroken", "l = 0.36, PT unbroken", fig4a}, {"s3_broken", "l = 0.36, PT broken", fig4b}};
    else throw ConfigError("unknown figure id '" + std::string(id) + "'");
    p.measured = id.front() != 's';
    return p;
}

// ---------------------------------------------------------------- outputs

/// Output directory with a manifest of everything written through it.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw IoError("cannot create output directory " + dir_.string());
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
        std::ostringstream buf;
        fill(buf);
        const std::string data = buf.str();
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << data;
        out.close();
        if (!out) throw IoError("write failed for " + path.string());
        manifest_.push_back({{"file", name}, {"bytes", data.size()}});
    }

    const nlohmann::json& manifest() const { return manifest_; }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    nlohmann::json manifest_ = nlohmann::json::array();
};

namespace detail {

inline nlohmann::json headline(const AnalysisReport& r) {
    using nlohmann::json;
    json h;
    h["winding_initial"] = r.winding_initial ? json(*r.winding_initial) : json(nullptr);
    h["winding_final"] = r.winding_final ? json(*r.winding_final) : json(nullptr);
    h["pt_status"] = std::string(to_string(r.pt.status));
    h["t0"] = r.critical.time_scales;
    json fp = json::array();
    for (const auto& f : r.fixed_points.points) fp.push_back({{"k", f.k}, {"kind", std::string(to_string(f.kind))}});
    h["fixed_points"] = fp;
    h["k_c"] = r.critical.momenta;
    h["detected_t_c"] = r.dqpt.detected_times();
    return h;
}

inline AnalysisReport analyze(const QuenchSpec& spec, const RunConfig& c) {
    AnalysisOptions opt;
    opt.kpoints = c.effective_kpoints();
    opt.t_max = c.t_max;
    opt.dt = c.dt;
    opt.dtop_subgrid = c.dtop_subgrid;
    opt.threads = c.threads;
    return in_module("dqpt-analysis", [&] { return run_analysis(spec, opt); });
}

inline ErrorBarResult errorbars(const QuenchSpec& spec, const RunConfig& c, std::vector<Quantity> quantities) {
    MonteCarloOptions opt;
    opt.quantities = std::move(quantities);
    opt.t_max = static_cast<int>(std::floor(c.t_max + 1e-9));
    opt.kpoints = c.mc_kpoints;
    opt.dtop_subgrid = c.dtop_subgrid;
    opt.threads = c.threads;
    return in_module("experiment-emulation", [&] { return monte_carlo_errorbars(spec, c.error, opt); });
}

/// Points with bars for one named quantity.
inline svg::Series bar_series(const ErrorBarResult& r, const std::string& quantity, const std::string& label,
                              const std::string& color) {
    svg::Series s;
    s.label = label;
    s.color = color;
    s.points = true;
    for (const auto& row : r.rows) {
        if (row.quantity != quantity) continue;
        s.x.push_back(row.t);
        s.y.push_back(row.center);
        s.err_plus.push_back(row.err_plus);
        s.err_minus.push_back(row.err_minus);
    }
    return s;
}

inline std::vector<svg::Panel> analysis_panels(const AnalysisReport& r, const std::string& title,
                                               const ErrorBarResult* bars) {
    std::vector<svg::Panel> panels;
    svg::Panel rate;
    rate.title = title + ": rate function";
    rate.ylabel = "g(t)";
    rate.series.push_back({"g(t)", svg::palette()[0], r.times, r.rate, {}, {}, false});
    if (bars != nullptr) rate.series.push_back(bar_series(*bars, "rate_function", "emulated", "#000000"));
    rate.markers = r.dqpt.detected_times();
    panels.push_back(std::move(rate));
    if (!r.dtop_traces.empty()) {
        svg::Panel d;
        d.title = title + ": DTOP";
        d.ylabel = "nu^m(t)";
        d.markers = r.dqpt.detected_times();
        for (std::size_t i = 0; i < r.dtop_traces.size(); ++i) {
            const auto& tr = r.dtop_traces[i];
            const auto& color = svg::palette()[i % svg::palette().size()];
            d.series.push_back({"nu^" + std::to_string(tr.m), color, tr.times, tr.values, {}, {}, false});
            if (bars != nullptr) {
                auto s = bar_series(*bars, "dtop_m" + std::to_string(tr.m), "", color);
                if (!s.x.empty()) d.series.push_back(std::move(s));
            }
        }
        panels.push_back(std::move(d));
    }
    return panels;
}

inline void write_analysis_files(OutputDir& out, const std::string& prefix, const AnalysisReport& r) {
    out.write(prefix + "rate_function.csv", [&](std::ostream& os) { write_rate_csv(os, r.times, r.rate); });
    out.write(prefix + "fixed_points.csv", [&](std::ostream& os) { write_fixed_points_csv(os, r.fixed_points); });
    out.write(prefix + "critical.csv", [&](std::ostream& os) { write_critical_csv(os, r.critical); });
    if (!r.dtop_traces.empty())
        out.write(prefix + "dtop.csv", [&](std::ostream& os) { write_dtop_csv(os, r.dtop_traces); });
    out.write(prefix + "analysis.json", [&](std::ostream& os) { os << to_json(r).dump(2) << '\n'; });
}

}  // namespace detail

struct RunResult {
    std::filesystem::path out_dir;
    nlohmann::json summary;
};

/// Executes one configured command. Throws ConfigError, IoError or
/// ModuleError; see execute() for the exit-code mapping.
inline RunResult run(const RunConfig& c) {
    validate(c);
    OutputDir out(c.out_dir);
    nlohmann::json headline;

    switch (c.command) {
        case Command::phase_diagram: {
            const auto cells = in_module("floquet-model", [&] {
                return phase_diagram_scan(c.theta1_range, c.theta2_range, c.resolution, c.loss,
                                          MomentumGrid(c.effective_kpoints()), c.threads);
            });
            out.write("phase_diagram.csv", [&](std::ostream& os) { write_phase_diagram_csv(os, cells); });
            std::ostringstream title;
            title << "winding number, l = " << c.loss;
            out.write("phase_diagram.svg", [&](std::ostream& os) { svg::write_phase_diagram(os, cells, c.resolution, title.str()); });
            std::map<std::string, std::size_t> counts;
            for (const auto& cell : cells) {
                if (cell.pt_status == PtStatus::broken) ++counts["pt_broken"];
                if (cell.winding) ++counts["nu=" + std::to_string(*cell.winding)];
                else ++counts["boundary"];
            }
            headline["cells"] = cells.size();
            headline["counts"] = counts;
            break;
        }
        case Command::quench:
        case Command::dtop: {
            const auto spec = c.spec();
            if (c.command == Command::dtop) {
                const auto pt = pt_classify(spec.final_angles, spec.loss, MomentumGrid(c.effective_kpoints()));
                if (pt.status == PtStatus::broken)
                    throw ModuleError("dqpt-analysis", PhysicsError(ErrorKind::pt_broken,
                                                                    "DTOP requested for a PT-broken final protocol"));
            }
            const auto r = detail::analyze(spec, c);
            detail::write_analysis_files(out, "", r);
            if (c.command == Command::quench) {
                const int steps = static_cast<int>(std::floor(c.t_max + 1e-9));
                std::vector<double> ts;
                for (int t = 0; t <= steps; ++t) ts.push_back(t);
                const auto field = in_module("quench-engine", [&] {
                    return loschmidt_field(spec, MomentumGrid(c.effective_kpoints()), ts, c.threads);
                });
                out.write("loschmidt.csv", [&](std::ostream& os) { write_loschmidt_csv(os, field); });
                const auto states = evolve_position(spec, steps, -1);
                out.write("position.csv", [&](std::ostream& os) { write_position_csv(os, states); });
            }
            out.write(std::string(to_string(c.command)) + ".svg",
                      [&](std::ostream& os) { svg::write_panels(os, detail::analysis_panels(r, "quench", nullptr)); });
            headline = detail::headline(r);
            break;
        }
        case Command::error_mc: {
            const auto spec = c.spec();
            const auto bars = detail::errorbars(spec, c, c.quantities);
            out.write("errorbars.csv", [&](std::ostream& os) { write_errorbar_csv(os, bars); });
            std::vector<svg::Panel> panels;
            std::map<std::string, svg::Panel> by_quantity;
            std::vector<std::string> order;
            for (const auto& row : bars.rows) {
                const std::string group = row.quantity.rfind("dtop", 0) == 0 ? "dtop" : row.quantity.rfind("pbar", 0) == 0 ? "pbar" : row.quantity;
                if (!by_quantity.count(group)) {
                    order.push_back(group);
                    by_quantity[group].title = "emulated " + group;
                    by_quantity[group].ylabel = group;
                }
                auto& panel = by_quantity[group];
                auto it = std::find_if(panel.series.begin(), panel.series.end(), [&](const svg::Series& s) { return s.label == row.quantity; });
                if (it == panel.series.end()) {
                    panel.series.push_back(detail::bar_series(bars, row.quantity, row.quantity,
                                                              svg::palette()[panel.series.size() % svg::palette().size()]));
                }
            }
            for (const auto& g : order)
                if (g != "pbar") panels.push_back(by_quantity[g]);
            if (!panels.empty()) out.write("errorbars.svg", [&](std::ostream& os) { svg::write_panels(os, panels); });
            headline["rows"] = bars.rows.size();
            headline["samples"] = bars.samples_requested;
            break;
        }
        case Command::reproduce_figure: {
            const auto pre = preset(c.figure);
            std::vector<svg::Panel> panels;
            for (const auto& panel : pre.panels) {
                const auto r = detail::analyze(panel.spec, c);
                detail::write_analysis_files(out, panel.id + "_", r);
                std::optional<ErrorBarResult> bars;
                if (pre.measured && c.error_bars) {
                    std::vector<Quantity> q{Quantity::rate_function};
                    if (!r.dtop_traces.empty()) q.push_back(Quantity::dtop);
                    bars = detail::errorbars(panel.spec, c, q);
                    out.write(panel.id + "_errorbars.csv", [&](std::ostream& os) { write_errorbar_csv(os, *bars); });
                }
                auto ps = detail::analysis_panels(r, panel.title, bars ? &*bars : nullptr);
                panels.insert(panels.end(), ps.begin(), ps.end());
                headline[panel.id] = detail::headline(r);
            }
            out.write(c.figure + ".svg", [&](std::ostream& os) { svg::write_panels(os, panels); });
            break;
        }
    }

    nlohmann::json summary;
    summary["tool"] = "qwdqpt";
    summary["version"] = std::string(kVersion);
    summary["input"] = to_json(c);
    summary["files"] = out.manifest();
    summary["headline"] = headline;
    {
        const auto path = out.path() / "run.json";
        std::ofstream f(path);
        if (!f) throw IoError("cannot open " + path.string() + " for writing");
        f << summary.dump(2) << '\n';
        if (!f) throw IoError("write failed for " + path.string());
    }
    return {out.path(), summary};
}

namespace detail {

inline std::string quoted(std::string_view s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        if (ch == '\n') {
            out += "\\n";
            continue;
        }
        out += ch;
    }
    return out + '"';
}

}  // namespace detail

/// run() with errors mapped to exit codes and a single-line report on err.
inline int execute(const RunConfig& c, std::ostream& log, std::ostream& err) {
    try {
        const auto r = run(c);
        log << "wrote " << r.summary["files"].size() + 1 << " files to " << r.out_dir.string() << '\n';
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "error code=" << exit_config << " kind=config message=" << detail::quoted(e.what()) << '\n';
        return exit_config;
    } catch (const ModuleError& e) {
        err << "error code=" << exit_physics << " kind=" << to_string(e.kind()) << " module=" << e.module()
            << " message=" << detail::quoted(e.what()) << '\n';
        return exit_physics;
    } catch (const PhysicsError& e) {
        err << "error code=" << exit_physics << " kind=" << to_string(e.kind()) << " message=" << detail::quoted(e.what())
            << '\n';
        return exit_physics;
    } catch (const IoError& e) {
        err << "error code=" << exit_io << " kind=io message=" << detail::quoted(e.what()) << '\n';
        return exit_io;
    } catch (const std::invalid_argument& e) {
        err << "error code=" << exit_config << " kind=config message=" << detail::quoted(e.what()) << '\n';
        return exit_config;
    }
}

}  // namespace qwdqpt::cli
