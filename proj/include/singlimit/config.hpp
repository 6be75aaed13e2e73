#pragma once

// Flat `section.key = value` run configuration.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/experiments.hpp"
#include "singlimit/grid.hpp"
#include "singlimit/params.hpp"
#include "singlimit/solver.hpp"

namespace singlimit {

/// Diffusivity a(x): a constant, or a piecewise-linear table of (x, a)
/// knots extended by constants beyond the first and last knot.
struct DiffusionProfile {
    double constant = 0.1;
    std::vector<std::pair<double, double>> table;

    bool tabulated() const noexcept { return !table.empty(); }

    double operator()(double x) const {
        if (table.empty()) return constant;
        if (x <= table.front().first) return table.front().second;
        if (x >= table.back().first) return table.back().second;
        for (std::size_t k = 1; k < table.size(); ++k) {
            const auto [x1, a1] = table[k];
            if (x <= x1) {
                const auto [x0, a0] = table[k - 1];
                return a0 + (a1 - a0) * (x - x0) / (x1 - x0);
            }
        }
        return table.back().second;
    }

    std::vector<double> sample(const Grid1D& g) const {
        std::vector<double> a(g.nx);
        for (std::size_t i = 0; i < g.nx; ++i) a[i] = (*this)(g.x(i));
        return a;
    }
};

struct RunConfig {
    // model
    WolbachiaParams params{};
    std::string delta_text = "10/9";
    Variant variant = Variant::PerfectTransmission;
    double epsilon = 0.1;
    std::optional<bool> clip_logistic;
    // grid
    double xmin = -15.0;
    double xmax = 15.0;
    double dx = 0.05;
    BoundaryCondition boundary = BoundaryCondition::Neumann;
    // time
    double dt = 0.005;
    double t_end = 125.0;
    std::size_t output_every = 5000;
    // diffusion
    DiffusionProfile diffusion{};
    // init
    InitialDataSpec init{};
    // experiment
    std::vector<double> epsilons{0.3, 0.1, 0.05, 0.02};
    double speed_level = 0.5;
    std::pair<double, double> speed_window{75.0, 125.0};
    double norm_horizon = 25.0;
    std::size_t norm_every = 1;
    std::size_t speed_every = 100;
    // solver
    bool clip_negatives = true;

    Grid1D grid() const { return Grid1D::from_spacing(xmin, xmax, dx); }

    SolverConfig solver() const {
        SolverConfig c;
        c.grid = grid();
        c.dt = dt;
        c.t_end = t_end;
        c.diffusivity = diffusion.sample(c.grid);
        c.output_every = output_every;
        c.clip_negatives = clip_negatives;
        c.boundary = boundary;
        c.validate();
        return c;
    }

    model::ScaledModel scaled_model() const { return scaled_model(epsilon); }

    model::ScaledModel scaled_model(double eps) const {
        return model::ScaledModel::make(params, eps, variant, clip_logistic);
    }

    SweepOptions sweep_options(unsigned threads = 0) const {
        SweepOptions o;
        o.norm_horizon = norm_horizon;
        o.norm_every = norm_every;
        o.speed_every = speed_every;
        o.speed_level = speed_level;
        o.speed_window = speed_window;
        o.threads = threads;
        return o;
    }

    /// Cross-field checks; parse_config runs this on every parsed file.
    void validate() const {
        params.validate();
        if (variant != Variant::ImperfectTransmission && params.mu != 0.0)
            throw ValidationError("model.mu > 0 requires model.variant = imperfect");
        if (!(std::isfinite(epsilon) && epsilon > 0.0)) throw ValidationError("model.epsilon must be > 0");
        const Grid1D g = grid();
        if (diffusion.tabulated()) {
            for (std::size_t k = 0; k < diffusion.table.size(); ++k) {
                if (!(diffusion.table[k].second > 0.0))
                    throw ValidationError("diffusion.a table values must be > 0");
                if (k > 0 && !(diffusion.table[k].first > diffusion.table[k - 1].first))
                    throw ValidationError("diffusion.a table abscissae must increase");
            }
        } else if (!(std::isfinite(diffusion.constant) && diffusion.constant > 0.0)) {
            throw ValidationError("diffusion.a must be > 0");
        }
        solver();
        init.validate(g);
        if (epsilons.empty()) throw ValidationError("experiment.epsilons must not be empty");
        for (std::size_t k = 0; k < epsilons.size(); ++k) {
            if (!(epsilons[k] > 0.0)) throw ValidationError("experiment.epsilons must be > 0");
            if (k > 0 && !(epsilons[k] < epsilons[k - 1]))
                throw ValidationError("experiment.epsilons must be strictly decreasing");
        }
        if (!(speed_level > 0.0 && speed_level < 1.0))
            throw ValidationError("experiment.speed_level must lie in (0,1)");
        if (!(speed_window.first >= 0.0 && speed_window.second > speed_window.first))
            throw ValidationError("experiment.speed_window must satisfy 0 <= start < end");
        if (!(norm_horizon > 0.0)) throw ValidationError("experiment.norm_horizon must be > 0");
        if (norm_every == 0 || speed_every == 0)
            throw ValidationError("experiment cadences must be >= 1");
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(std::string_view text) {
    const std::string s(trim(text));
    if (s.empty()) throw ValidationError("empty number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
        throw ValidationError("'" + s + "' is not a finite number");
    return v;
}

/// Decimal or ratio `a/b`.
inline double parse_ratio(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_number(text);
    const double den = parse_number(text.substr(slash + 1));
    if (den == 0.0) throw ValidationError("ratio with zero denominator");
    return parse_number(text.substr(0, slash)) / den;
}

inline std::size_t parse_count(std::string_view text) {
    const std::string s(trim(text));
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError("'" + s + "' is not a non-negative integer");
    return static_cast<std::size_t>(std::stoull(s));
}

inline bool parse_bool(std::string_view text) {
    const auto s = trim(text);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ValidationError("'" + std::string(s) + "' is not a boolean");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    for (auto item : split(text, ',')) out.push_back(parse_number(item));
    return out;
}

inline DiffusionProfile parse_diffusion(std::string_view text) {
    DiffusionProfile d;
    if (text.find(':') == std::string_view::npos) {
        d.constant = parse_number(text);
        return d;
    }
    for (auto knot : split(text, ',')) {
        const auto colon = knot.find(':');
        if (colon == std::string_view::npos) throw ValidationError("table knot must read x:a");
        d.table.emplace_back(parse_number(knot.substr(0, colon)), parse_number(knot.substr(colon + 1)));
    }
    if (d.table.size() < 2) throw ValidationError("diffusion table needs >= 2 knots");
    return d;
}

/// Shortest decimal that reads back to the same double.
inline std::string format_shortest(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace detail

inline void apply_config_key(RunConfig& c, std::string_view key, std::string_view value) {
    using namespace detail;
    auto& p = c.params;
    if (key == "model.fu") p.fu = parse_number(value);
    else if (key == "model.du") p.du = parse_number(value);
    else if (key == "model.delta") p.delta = parse_ratio(value), c.delta_text = std::string(trim(value));
    else if (key == "model.sf") p.sf = parse_number(value);
    else if (key == "model.sh") p.sh = parse_number(value);
    else if (key == "model.sigma") p.sigma = parse_number(value);
    else if (key == "model.mu") p.mu = parse_number(value);
    else if (key == "model.variant") c.variant = parse_variant(trim(value));
    else if (key == "model.epsilon") c.epsilon = parse_number(value);
    else if (key == "model.clip_logistic") {
        const auto v = trim(value);
        c.clip_logistic = v == "auto" ? std::nullopt : std::optional<bool>(parse_bool(v));
    }
    else if (key == "grid.xmin") c.xmin = parse_number(value);
    else if (key == "grid.xmax") c.xmax = parse_number(value);
    else if (key == "grid.dx") c.dx = parse_number(value);
    else if (key == "grid.boundary") {
        const auto v = trim(value);
        if (v == "neumann") c.boundary = BoundaryCondition::Neumann;
        else if (v == "dirichlet") c.boundary = BoundaryCondition::Dirichlet;
        else throw ValidationError("boundary must be neumann or dirichlet");
    }
    else if (key == "time.dt") c.dt = parse_number(value);
    else if (key == "time.t_end") c.t_end = parse_number(value);
    else if (key == "time.output_every") c.output_every = parse_count(value);
    else if (key == "diffusion.a") c.diffusion = parse_diffusion(value);
    else if (key == "init.shape") {
        if (trim(value) != "plateau_bump") throw ValidationError("init.shape must be plateau_bump");
    }
    else if (key == "init.amplitude") c.init.amplitude = parse_number(value);
    else if (key == "init.radius") c.init.radius = parse_number(value);
    else if (key == "init.smoothing") c.init.smoothing = parse_number(value);
    else if (key == "experiment.epsilons") c.epsilons = parse_list(value);
    else if (key == "experiment.speed_level") c.speed_level = parse_number(value);
    else if (key == "experiment.speed_window") {
        const auto w = parse_list(value);
        if (w.size() != 2) throw ValidationError("speed_window takes two values: start, end");
        c.speed_window = {w[0], w[1]};
    }
    else if (key == "experiment.norm_horizon") c.norm_horizon = parse_number(value);
    else if (key == "experiment.norm_every") c.norm_every = parse_count(value);
    else if (key == "experiment.speed_every") c.speed_every = parse_count(value);
    else if (key == "solver.clip_negatives") c.clip_negatives = parse_bool(value);
    else throw ValidationError("unknown key");
}

/// Parses and validates a configuration. Omitted keys keep their defaults.
inline RunConfig parse_config(std::string_view text) {
    RunConfig c;
    std::map<std::string, std::size_t> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? text.npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto where = "line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError(where + ": expected section.key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos)
            throw ValidationError(where + ": key '" + key + "' lacks a section");
        if (auto it = seen.find(key); it != seen.end())
            throw ValidationError(where + ": duplicate key '" + key + "' (first set on line " +
                                  std::to_string(it->second) + ")");
        seen.emplace(key, line_no);
        try {
            apply_config_key(c, key, value);
            if (key.starts_with("model.")) c.params.validate_ranges();
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + key + ": " + e.what());
        }
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        // Attribute cross-field failures to the latest line naming an involved key.
        const std::string msg = e.what();
        std::pair<std::size_t, std::string> culprit{0, ""};
        for (const auto& [key, ln] : seen) {
            const auto field = key.substr(key.find('.') + 1);
            if ((msg.find(key) != std::string::npos || msg.find(field + " ") == 0 ||
                 msg.find(" " + field + " ") != std::string::npos) && ln > culprit.first)
                culprit = {ln, key};
        }
        if (culprit.first == 0) throw;
        throw ValidationError("line " + std::to_string(culprit.first) + ": " + culprit.second + ": " + msg);
    }
    return c;
}

/// Fully expanded configuration, one key per line. Values not fixed by the
/// reference parameter block carry a `# choice` comment.
inline std::string show_config(const RunConfig& c) {
    using detail::format_shortest;
    std::ostringstream os;
    auto line = [&](const std::string& key, const std::string& value, bool choice) {
        os << key << " = " << value;
        if (choice) os << "  # choice";
        os << '\n';
    };
    auto list = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + format_shortest(v[k]);
        return s;
    };
    const auto& p = c.params;
    line("model.fu", format_shortest(p.fu), false);
    line("model.du", format_shortest(p.du), false);
    line("model.delta", c.delta_text, false);
    line("model.sf", format_shortest(p.sf), false);
    line("model.sh", format_shortest(p.sh), false);
    line("model.sigma", format_shortest(p.sigma), false);
    line("model.mu", format_shortest(p.mu), false);
    line("model.variant", std::string(to_string(c.variant)), false);
    line("model.epsilon", format_shortest(c.epsilon), true);
    line("model.clip_logistic",
         c.clip_logistic ? (*c.clip_logistic ? "true" : "false") : "auto", true);
    line("grid.xmin", format_shortest(c.xmin), false);
    line("grid.xmax", format_shortest(c.xmax), false);
    line("grid.dx", format_shortest(c.dx), false);
    line("grid.boundary", c.boundary == BoundaryCondition::Neumann ? "neumann" : "dirichlet", true);
    line("time.dt", format_shortest(c.dt), false);
    line("time.t_end", format_shortest(c.t_end), false);
    line("time.output_every", std::to_string(c.output_every), false);
    if (c.diffusion.tabulated()) {
        std::string s;
        for (std::size_t k = 0; k < c.diffusion.table.size(); ++k)
            s += (k ? ", " : "") + format_shortest(c.diffusion.table[k].first) + ":" +
                 format_shortest(c.diffusion.table[k].second);
        line("diffusion.a", s, true);
    } else {
        line("diffusion.a", format_shortest(c.diffusion.constant), false);
    }
    line("init.shape", "plateau_bump", true);
    line("init.amplitude", format_shortest(c.init.amplitude), true);
    line("init.radius", format_shortest(c.init.radius), true);
    line("init.smoothing", format_shortest(c.init.smoothing), true);
    line("experiment.epsilons", list(c.epsilons), true);
    line("experiment.speed_level", format_shortest(c.speed_level), true);
    line("experiment.speed_window", list({c.speed_window.first, c.speed_window.second}), true);
    line("experiment.norm_horizon", format_shortest(c.norm_horizon), true);
    line("experiment.norm_every", std::to_string(c.norm_every), true);
    line("experiment.speed_every", std::to_string(c.speed_every), true);
    line("solver.clip_negatives", c.clip_negatives ? "true" : "false", true);
    return os.str();
}

} // namespace singlimit
