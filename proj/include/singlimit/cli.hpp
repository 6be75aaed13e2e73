#pragma once

// Command-line front end. Exit status: 0 success, 1 validation error,
// 2 runtime or solver error, 3 assumption-check failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "singlimit/config.hpp"
#include "singlimit/errors.hpp"
#include "singlimit/experiments.hpp"
#include "singlimit/io.hpp"
#include "singlimit/model.hpp"

namespace singlimit::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kAssumption = 3 };

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) return parse_config("");
    const std::string text = io::read_file(path);
    try {
        return parse_config(text);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

enum class RunModel { System, Limit, Alternative };

inline RunModel parse_run_model(const std::string& s) {
    if (s == "system") return RunModel::System;
    if (s == "limit") return RunModel::Limit;
    if (s == "alt") return RunModel::Alternative;
    throw ValidationError("--model must be system, limit or alt");
}

inline model::ScaledModel model_for(const RunConfig& c, RunModel which) {
    if (which == RunModel::Alternative) {
        WolbachiaParams q = c.params;
        q.mu = 0.0;
        return model::ScaledModel::make(q, c.epsilon, Variant::AlternativeScaling, c.clip_logistic);
    }
    if (c.variant == Variant::AlternativeScaling && which == RunModel::Limit)
        throw ValidationError("the alternative scaling has no limit equation");
    return c.scaled_model();
}

/// Frequency snapshots at the given cadence for one model.
inline std::vector<TimedField> frequency_series(const RunConfig& c, RunModel which,
                                                const SolverConfig& sc, std::size_t every,
                                                std::vector<TimedField>* n_series = nullptr,
                                                InvariantReport* invariants = nullptr) {
    const auto m = model_for(c, which);
    if (which == RunModel::Limit) {
        const Field p0 = make_frequency_profile(c.init, sc.grid);
        return simulate_limit(m, p0, sc, every).snapshots;
    }
    const auto init = make_initial_data(m, c.init, sc.grid);
    const auto traj = simulate_system(m, init.state, sc, every);
    if (n_series)
        for (const auto& r : traj.snapshots) n_series->push_back({r.time, r.n});
    if (invariants) *invariants = traj.invariants;
    return traj.frequency_series();
}

inline int cmd_simulate(const RunConfig& c, const std::string& which_name, const std::string& out_dir,
                        std::ostream& out) {
    const auto which = parse_run_model(which_name);
    const auto sc = c.solver();
    std::vector<TimedField> n_series;
    InvariantReport inv;
    const auto p = frequency_series(c, which, sc, c.output_every, &n_series, &inv);
    io::write_series(p, out_dir, "p");
    for (std::size_t k = 0; k < n_series.size(); ++k)
        io::write_snapshot(n_series[k].field, std::filesystem::path(out_dir) / io::snapshot_name("n", k));
    out << "wrote " << p.size() << " snapshots to " << out_dir << "\n";
    if (which != RunModel::Limit) {
        out << "invariants: " << (inv.ok() ? "ok" : "VIOLATED") << " (" << inv.describe() << ")\n";
        if (!inv.ok()) return kRuntime;
    }
    return kOk;
}

inline int cmd_converge(const RunConfig& c, const std::string& out_dir, bool svg, std::ostream& out) {
    auto opt = c.sweep_options(threads_from_env());
    opt.keep_profiles = svg;
    const auto report = run_convergence_sweep(c.params, c.variant, c.epsilons, c.init, c.solver(), opt);
    const std::filesystem::path dir(out_dir);
    io::write_report(report, dir / "report.csv");
    bool ok = true;
    char buf[160];
    for (std::size_t k = 0; k < report.epsilons.size(); ++k) {
        std::snprintf(buf, sizeof buf, "eps=%-6g err_p=%.6g err_m=%.6g speed=%.6g (%.1fs)\n",
                      report.epsilons[k], report.err_p[k], report.err_m[k], report.speeds[k],
                      report.runtimes[k]);
        out << buf;
        ok = ok && report.invariants[k].ok();
    }
    out << "limit speed " << report.limit_speed << "\n";
    if (svg) {
        for (std::size_t k = 0; k < report.epsilons.size(); ++k) {
            std::vector<io::PlotSeries> groups{
                {report.limit_profiles, "#1f4fd1", false, "limit"},
                {report.profiles[k], "#d1241f", true, "eps = " + io::format_double(report.epsilons[k])}};
            char name[64];
            std::snprintf(name, sizeof name, "profiles_%zu.svg", k);
            io::write_svg(groups, "p(x, t), eps = " + io::format_double(report.epsilons[k]), dir / name);
        }
    }
    if (!ok) {
        out << "runtime invariants VIOLATED\n";
        return kRuntime;
    }
    return kOk;
}

inline int cmd_equilibria(const RunConfig& c, std::ostream& out) {
    const auto m = c.scaled_model();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %14s %14s  %s\n", "label", "ni", "nu", "stability");
    out << buf;
    for (const auto& e : model::equilibria(m)) {
        std::snprintf(buf, sizeof buf, "%-12s %14.9f %14.9f  %s%s\n",
                      std::string(model::to_string(e.label)).c_str(), e.ni, e.nu,
                      std::string(model::to_string(e.stability)).c_str(),
                      e.marginal ? " (marginal)" : "");
        out << buf;
    }
    return kOk;
}

inline int cmd_wavespeed(const RunConfig& c, const std::string& which_name,
                         const std::string& series_dir, std::ostream& out) {
    std::vector<TimedField> series;
    if (!series_dir.empty()) {
        series = io::read_series(series_dir);
    } else {
        const auto sc = c.solver();
        if (sc.t_end < c.speed_window.second - 1e-9)
            throw ValidationError("time.t_end does not reach the end of experiment.speed_window");
        series = frequency_series(c, parse_run_model(which_name), sc, c.speed_every);
    }
    const double speed = estimate_wave_speed(series, c.speed_level, c.speed_window);
    out << io::format_double(speed) << "\n";
    return kOk;
}

inline int cmd_check(const RunConfig& c, std::ostream& out) {
    std::vector<double> eps{c.epsilon};
    for (double e : c.epsilons)
        if (e != c.epsilon) eps.push_back(e);
    bool ok = true;
    char buf[200];
    for (double e : eps) {
        const auto report = model::check_assumptions(c.scaled_model(e), 200);
        for (const auto& chk : report.checks) {
            std::snprintf(buf, sizeof buf, "eps=%-6g %-15s %s worst=%.6g  %s\n", e, chk.name.c_str(),
                          chk.passed ? "PASS" : "FAIL", chk.worst, chk.detail.c_str());
            out << buf;
        }
        ok = ok && report.passed();
    }
    return ok ? kOk : kAssumption;
}

/// Parses argv and runs the selected subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"singlimit: Wolbachia reaction-diffusion systems and their singular limit"};
    app.require_subcommand(0, 1);
    bool show = false;
    std::string config_path;
    app.add_flag("--show-config", show, "print the fully expanded configuration and exit");
    app.add_option("--config", config_path, "configuration file (for --show-config)");

    std::string cfg, which = "system", out_dir, series_dir;
    bool svg = false;
    auto* simulate = app.add_subcommand("simulate", "run one model and write snapshot CSVs");
    simulate->add_option("--config", cfg, "configuration file");
    simulate->add_option("--model", which, "system | limit | alt");
    simulate->add_option("--out", out_dir, "output directory")->required();

    auto* converge = app.add_subcommand("converge", "epsilon sweep against the limit equation");
    converge->add_option("--config", cfg, "configuration file");
    converge->add_option("--out", out_dir, "output directory")->required();
    converge->add_flag("--svg", svg, "also write SVG profile plots");

    auto* equil = app.add_subcommand("equilibria", "homogeneous equilibria and their stability");
    equil->add_option("--config", cfg, "configuration file");

    auto* wave = app.add_subcommand("wavespeed", "fitted front speed over the speed window");
    wave->add_option("--config", cfg, "configuration file");
    wave->add_option("--model", which, "system | limit | alt");
    wave->add_option("--series", series_dir, "read a simulate output directory instead of running");

    auto* check = app.add_subcommand("check", "audit the structural assumptions");
    check->add_option("--config", cfg, "configuration file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    try {
        if (show) {
            out << show_config(load_config(config_path));
            return kOk;
        }
        if (app.get_subcommands().empty()) {
            out << app.help();
            return kValidation;
        }
        const auto* sub = app.get_subcommands().front();
        const RunConfig c = load_config(cfg);
        if (sub == simulate) return cmd_simulate(c, which, out_dir, out);
        if (sub == converge) return cmd_converge(c, out_dir, svg, out);
        if (sub == equil) return cmd_equilibria(c, out);
        if (sub == wave) return cmd_wavespeed(c, which, series_dir, out);
        if (sub == check) return cmd_check(c, out);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kValidation;
}

} // namespace singlimit::cli
