#pragma once

// Experiment harness: initial data for a local introduction, trajectory
// drivers with runtime invariant monitoring, the epsilon sweep, front
// tracking and the extinction/invasion verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/grid.hpp"
#include "singlimit/model.hpp"
#include "singlimit/reduction.hpp"
#include "singlimit/solver.hpp"

namespace singlimit {

/// Plateau bump for the introduced frequency: amplitude on |x| <= radius,
/// linear ramp to zero over the next `smoothing` units, zero outside.
struct InitialDataSpec {
    double amplitude = 0.8;
    double radius = 0.55;
    double smoothing = 0.5;

    void validate(const Grid1D& grid) const {
        if (!(amplitude > 0.0 && amplitude < 1.0))
            throw ValidationError("init amplitude must lie in (0,1)");
        if (!(radius > 0.0)) throw ValidationError("init radius must be > 0");
        if (!(smoothing >= 0.0)) throw ValidationError("init smoothing must be >= 0");
        const double half = 0.5 * (grid.xmax - grid.xmin);
        if (!(radius + smoothing < half))
            throw ValidationError("init bump does not fit inside the domain");
    }

    double profile(double x) const noexcept {
        const double ax = std::abs(x);
        if (ax <= radius) return amplitude;
        if (ax < radius + smoothing) return amplitude * (radius + smoothing - ax) / smoothing;
        return 0.0;
    }
};

struct InitialData {
    PopulationState state;
    Field p_init;
};

inline Field make_frequency_profile(const InitialDataSpec& spec, const Grid1D& grid) {
    spec.validate(grid);
    return Field::sample(grid, [&](double x) { return spec.profile(x); });
}

/// Introduction of infected individuals into the uninfected equilibrium:
/// phi = p/(1-p), nu = N0/(1+phi), ni = phi nu with N0 the extinction-state
/// total density, so the reduced n is constant (h(0) with a slow manifold).
inline InitialData make_initial_data(const model::ScaledModel& m, const InitialDataSpec& spec,
                                     const Grid1D& grid) {
    if (!(spec.amplitude < 1.0)) throw ValidationError("init amplitude 1 makes phi singular");
    Field p = make_frequency_profile(spec, grid);
    const auto& q = m.params();
    const double total = m.variant() == Variant::AlternativeScaling
                             ? (1.0 - q.du / q.fu) / (m.epsilon() * q.sigma)
                             : m.capacity() - model::h_of_p(m, 0.0);
    if (!(total > 0.0)) throw ValidationError("eps too large: no positive uninfected equilibrium");
    InitialData d{{Field(grid), Field(grid), 0.0}, p};
    for (std::size_t i = 0; i < grid.nx; ++i) {
        const double phi = p[i] / (1.0 - p[i]);
        d.state.nu[i] = total / (1.0 + phi);
        d.state.ni[i] = phi * d.state.nu[i];
    }
    return d;
}

/// Runtime invariants checked at every observed time: non-negative densities,
/// p within [0, 1] and the L-infinity bound n <= max(max h, max n_init).
struct InvariantReport {
    std::size_t snapshots = 0;
    double min_density = std::numeric_limits<double>::infinity();
    double min_p = std::numeric_limits<double>::infinity();
    double max_p = -std::numeric_limits<double>::infinity();
    double max_n = -std::numeric_limits<double>::infinity();
    double n_bound = std::numeric_limits<double>::infinity();
    bool bound_applies = false;

    bool ok() const {
        return snapshots > 0 && min_density >= -kRoundoffBand && min_p >= -kRoundoffBand &&
               max_p <= 1.0 + kRoundoffBand && (!bound_applies || max_n <= n_bound);
    }

    std::string describe() const {
        std::ostringstream os;
        os << "snapshots=" << snapshots << " min_density=" << min_density << " p in [" << min_p
           << ", " << max_p << "]";
        if (bound_applies) os << " max_n=" << max_n << " bound=" << n_bound;
        return os.str();
    }
};

class InvariantMonitor {
public:
    InvariantMonitor(const model::ScaledModel& m, const PopulationState& initial) : model_(m) {
        if (m.has_slow_manifold()) {
            double n_init = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < initial.ni.size(); ++i)
                n_init = std::max(n_init, reduced_population(m, initial.ni[i] + initial.nu[i]));
            report_.n_bound = std::max(model::max_h(m), n_init) + 1e-6;
            report_.bound_applies = true;
        }
    }

    void observe(const PopulationState& s) {
        ++report_.snapshots;
        for (std::size_t i = 0; i < s.ni.size(); ++i) {
            const double a = s.ni[i], b = s.nu[i];
            report_.min_density = std::min({report_.min_density, a, b});
            const double p = frequency(a, b);
            report_.min_p = std::min(report_.min_p, p);
            report_.max_p = std::max(report_.max_p, p);
            if (report_.bound_applies)
                report_.max_n = std::max(report_.max_n, reduced_population(model_, a + b));
        }
    }

    const InvariantReport& report() const noexcept { return report_; }

private:
    model::ScaledModel model_;
    InvariantReport report_;
};

/// Observer invoked with (step index, state) at step 0, at every multiple of
/// `every`, and at the final step.
using SystemObserver = std::function<void(std::size_t, const PopulationState&)>;
using ScalarObserver = std::function<void(std::size_t, double, const Field&)>;

inline PopulationState run_system(const model::ScaledModel& m, PopulationState state,
                                  const SolverConfig& config, std::size_t every,
                                  const SystemObserver& observe,
                                  StepDiagnostics* diagnostics = nullptr) {
    config.validate();
    if (every == 0) throw ValidationError("observation cadence must be >= 1");
    SystemStepper stepper(m, config);
    const std::size_t steps = config.steps();
    state.time = 0.0;
    if (observe) observe(0, state);
    for (std::size_t k = 0; k < steps; ++k) {
        stepper.step(state, k);
        if (observe && ((k + 1) % every == 0 || k + 1 == steps)) observe(k + 1, state);
    }
    if (diagnostics) *diagnostics = stepper.diagnostics();
    return state;
}

inline Field run_scalar(const std::function<double(double)>& reaction, Field p,
                        const SolverConfig& config, std::size_t every,
                        const ScalarObserver& observe, StepDiagnostics* diagnostics = nullptr) {
    config.validate();
    if (every == 0) throw ValidationError("observation cadence must be >= 1");
    ScalarStepper stepper(reaction, config);
    const std::size_t steps = config.steps();
    double t = 0.0;
    if (observe) observe(0, t, p);
    for (std::size_t k = 0; k < steps; ++k) {
        stepper.step(p, t, k);
        if (observe && ((k + 1) % every == 0 || k + 1 == steps)) observe(k + 1, t, p);
    }
    if (diagnostics) *diagnostics = stepper.diagnostics();
    return p;
}

struct SystemTrajectory {
    std::vector<ReducedFields> snapshots;
    PopulationState final_state;
    InvariantReport invariants;
    StepDiagnostics diagnostics;

    std::vector<TimedField> frequency_series() const {
        std::vector<TimedField> out;
        out.reserve(snapshots.size());
        for (const auto& s : snapshots) out.push_back({s.time, s.p});
        return out;
    }
};

inline SystemTrajectory simulate_system(const model::ScaledModel& m, const PopulationState& init,
                                        const SolverConfig& config, std::size_t every) {
    SystemTrajectory out;
    InvariantMonitor monitor(m, init);
    out.final_state = run_system(
        m, init, config, every,
        [&](std::size_t, const PopulationState& s) {
            monitor.observe(s);
            out.snapshots.push_back(to_reduced(m, s));
        },
        &out.diagnostics);
    out.invariants = monitor.report();
    return out;
}

struct ScalarTrajectory {
    std::vector<TimedField> snapshots;
    Field final_p;
    StepDiagnostics diagnostics;
};

inline ScalarTrajectory simulate_limit(const model::ScaledModel& m, const Field& p_init,
                                       const SolverConfig& config, std::size_t every) {
    ScalarTrajectory out;
    out.final_p = run_scalar(
        model::limit_reaction_fn(m), p_init, config, every,
        [&](std::size_t, double t, const Field& p) { out.snapshots.push_back({t, p}); },
        &out.diagnostics);
    return out;
}

/// Rightmost crossing of `level`, linearly interpolated between nodes.
inline std::optional<double> front_position(const Field& p, double level) {
    const std::size_t n = p.size();
    for (std::size_t i = n - 1; i-- > 0;) {
        const bool a = p[i] >= level, b = p[i + 1] >= level;
        if (a != b) {
            const double x0 = p.grid.x(i);
            if (p[i] == p[i + 1]) return x0;
            return x0 + (p[i] - level) / (p[i] - p[i + 1]) * p.grid.dx();
        }
    }
    return std::nullopt;
}

namespace detail {

inline bool in_window(double t, std::pair<double, double> window) {
    return t >= window.first - 1e-9 && t <= window.second + 1e-9;
}

inline std::string eps_tag(double eps) {
    std::ostringstream os;
    os << " at eps = " << eps;
    return os.str();
}

} // namespace detail

/// Front positions over the window; throws naming the first snapshot whose
/// level set is absent or within 2 dx of a boundary.
inline std::vector<std::pair<double, double>> front_track(std::span<const TimedField> series,
                                                          double level,
                                                          std::pair<double, double> window) {
    std::vector<std::pair<double, double>> track;
    for (const auto& s : series) {
        if (!detail::in_window(s.time, window)) continue;
        const auto x = front_position(s.field, level);
        const Grid1D& g = s.field.grid;
        std::ostringstream os;
        if (!x) {
            os << "level set p = " << level << " absent in snapshot t = " << s.time;
            throw ValidationError(os.str());
        }
        if (*x < g.xmin + 2.0 * g.dx() || *x > g.xmax - 2.0 * g.dx()) {
            os << "front within 2 dx of the boundary in snapshot t = " << s.time;
            throw ValidationError(os.str());
        }
        track.emplace_back(s.time, *x);
    }
    return track;
}

/// Least-squares slope of the tracked front position against time.
inline double estimate_wave_speed(std::span<const TimedField> series, double level,
                                  std::pair<double, double> window) {
    const auto track = front_track(series, level, window);
    if (track.size() < 2) throw ValidationError("wave speed needs >= 2 snapshots in the window");
    double mt = 0.0, mx = 0.0;
    for (const auto& [t, x] : track) mt += t, mx += x;
    mt /= static_cast<double>(track.size());
    mx /= static_cast<double>(track.size());
    double stt = 0.0, stx = 0.0;
    for (const auto& [t, x] : track) stt += (t - mt) * (t - mt), stx += (t - mt) * (x - mx);
    return stx / stt;
}

inline double estimate_wave_speed(std::span<const TimedField> series) {
    if (series.empty()) throw ValidationError("wave speed of an empty series");
    return estimate_wave_speed(series, 0.5, {series.front().time, series.back().time});
}

/// Largest endpoint deviation from the first snapshot over the window.
inline double endpoint_deviation(std::span<const TimedField> series,
                                 std::pair<double, double> window) {
    if (series.empty()) return 0.0;
    const Field& ref = series.front().field;
    const std::size_t last = ref.size() - 1;
    double dev = 0.0;
    for (const auto& s : series) {
        if (!detail::in_window(s.time, window)) continue;
        dev = std::max({dev, std::abs(s.field[0] - ref[0]), std::abs(s.field[last] - ref[last])});
    }
    return dev;
}

enum class Outcome { Invaded, Extinct, Undecided };

inline std::string_view to_string(Outcome o) {
    switch (o) {
    case Outcome::Invaded: return "Invaded";
    case Outcome::Extinct: return "Extinct";
    case Outcome::Undecided: return "Undecided";
    }
    return "?";
}

/// Extinct if max p < 0.1, Invaded if p > 0.9 over the whole initial support.
inline Outcome classify_outcome(const Field& p_final, const Field& p_init) {
    double max_p = 0.0;
    for (double v : p_final.values) max_p = std::max(max_p, v);
    if (max_p < 0.1) return Outcome::Extinct;
    double min_support = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p_init.size(); ++i)
        if (p_init[i] > 0.0) min_support = std::min(min_support, p_final[i]);
    return min_support > 0.9 ? Outcome::Invaded : Outcome::Undecided;
}

/// Runs the two-population system from the introduction profile to t_end.
inline Outcome extinction_check(const model::ScaledModel& m, const InitialDataSpec& spec,
                                const SolverConfig& config) {
    const auto init = make_initial_data(m, spec, config.grid);
    const auto final_state = run_system(m, init.state, config, config.steps(), nullptr);
    Field p(config.grid);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = frequency(final_state.ni[i], final_state.nu[i]);
    return classify_outcome(p, init.p_init);
}

/// Same verdict for the limiting scalar equation.
inline Outcome extinction_check_limit(const model::ScaledModel& m, const InitialDataSpec& spec,
                                      const SolverConfig& config) {
    const Field p0 = make_frequency_profile(spec, config.grid);
    const Field p = run_scalar(model::limit_reaction_fn(m), p0, config, config.steps(), nullptr);
    return classify_outcome(p, p0);
}

/// Sweep parallelism cap from SINGLIMIT_THREADS (0 = sequential); defaults
/// to the hardware concurrency.
inline unsigned threads_from_env() {
    if (const char* v = std::getenv("SINGLIMIT_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end != v && *end == '\0' && n >= 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepOptions {
    double norm_horizon = 25.0;                 ///< T of the space-time norms
    std::size_t norm_every = 1;                 ///< steps between norm samples
    std::size_t speed_every = 100;              ///< steps between front samples
    double speed_level = 0.5;
    std::pair<double, double> speed_window{75.0, 125.0};
    unsigned threads = 0;                       ///< 0 = sequential
    bool keep_profiles = false;                 ///< store p every config.output_every steps
};

struct ConvergenceReport {
    std::vector<double> epsilons;
    std::vector<double> err_p;
    std::vector<double> err_m;
    std::vector<double> speeds;        ///< NaN when t_end does not cover the window
    double limit_speed = std::nan("");
    std::vector<double> runtimes;      ///< wall-clock seconds per epsilon
    std::vector<InvariantReport> invariants;
    std::vector<double> boundary_deviation;
    double limit_boundary_deviation = 0.0;
    std::vector<std::vector<TimedField>> profiles;
    std::vector<TimedField> limit_profiles;
};

namespace detail {

struct SweepRun {
    ErrorNorms norms;
    double speed = std::nan("");
    double runtime = 0.0;
    InvariantReport invariants;
    double boundary_deviation = 0.0;
    std::vector<TimedField> profiles;
};

} // namespace detail

/// Solves the limit equation once and the two-population system for every
/// epsilon on the shared grid and cadence; per-epsilon runs may execute in
/// parallel, results are ordered by epsilon.
inline ConvergenceReport run_convergence_sweep(const WolbachiaParams& params, Variant variant,
                                               const std::vector<double>& epsilons,
                                               const InitialDataSpec& spec,
                                               const SolverConfig& config,
                                               const SweepOptions& opt = {}) {
    if (variant == Variant::AlternativeScaling)
        throw ValidationError("the alternative scaling has no limit equation to sweep against");
    if (epsilons.empty()) throw ValidationError("sweep needs at least one epsilon");
    for (std::size_t k = 1; k < epsilons.size(); ++k)
        if (!(epsilons[k] < epsilons[k - 1]))
            throw ValidationError("sweep epsilons must be strictly decreasing");
    config.validate();
    spec.validate(config.grid);
    if (opt.norm_every == 0 || opt.speed_every == 0)
        throw ValidationError("sweep cadences must be >= 1");
    const std::size_t horizon_steps =
        static_cast<std::size_t>(std::llround(opt.norm_horizon / config.dt));
    if (horizon_steps == 0 || horizon_steps > config.steps() || horizon_steps % opt.norm_every != 0)
        throw ValidationError("norm horizon must be a positive multiple of norm_every steps within t_end");

    std::vector<model::ScaledModel> models;
    for (double eps : epsilons) {
        auto m = model::ScaledModel::make(params, eps, variant);
        const auto audit = model::check_assumptions(m, 50);
        if (!audit.passed())
            throw ValidationError("assumption audit failed" + detail::eps_tag(eps));
        if (!(eps * model::max_h(m) < 1.0))
            throw ValidationError("eps exceeds 1 / max h" + detail::eps_tag(eps));
        models.push_back(m);
    }

    const bool want_speed = config.t_end >= opt.speed_window.second - 1e-9;
    const std::size_t out_every = config.output_every;
    auto observed = [&](std::size_t k) {
        return (k <= horizon_steps && k % opt.norm_every == 0) || k % opt.speed_every == 0 ||
               k % out_every == 0 || k == config.steps();
    };

    ConvergenceReport report;
    report.epsilons = epsilons;

    // Limit equation, shared by every epsilon.
    std::vector<TimedField> limit_norm_series, limit_speed_series;
    const Field p0 = make_frequency_profile(spec, config.grid);
    run_scalar(model::limit_reaction_fn(models.front()), p0, config, 1,
               [&](std::size_t k, double t, const Field& p) {
                   if (!observed(k)) return;
                   if (k <= horizon_steps && k % opt.norm_every == 0) limit_norm_series.push_back({t, p});
                   if (k % opt.speed_every == 0) limit_speed_series.push_back({t, p});
                   if (opt.keep_profiles && (k % out_every == 0 || k == config.steps()))
                       report.limit_profiles.push_back({t, p});
               });
    if (want_speed) {
        report.limit_speed = estimate_wave_speed(limit_speed_series, opt.speed_level, opt.speed_window);
        report.limit_boundary_deviation = endpoint_deviation(limit_speed_series, opt.speed_window);
    }

    auto run_one = [&](std::size_t idx) {
        const auto start = std::chrono::steady_clock::now();
        const auto& m = models[idx];
        detail::SweepRun out;
        try {
            const auto init = make_initial_data(m, spec, config.grid);
            InvariantMonitor monitor(m, init.state);
            ErrorNormAccumulator acc(opt.norm_horizon);
            std::vector<TimedField> speed_series;
            std::size_t next_limit = 0;
            run_system(m, init.state, config, 1, [&](std::size_t k, const PopulationState& s) {
                if (!observed(k)) return;
                monitor.observe(s);
                const bool norm_sample = k <= horizon_steps && k % opt.norm_every == 0;
                const bool speed_sample = k % opt.speed_every == 0;
                const bool profile_sample =
                    opt.keep_profiles && (k % out_every == 0 || k == config.steps());
                if (!(norm_sample || speed_sample || profile_sample)) return;
                const ReducedFields r = to_reduced(m, s);
                if (norm_sample) {
                    const auto& lim = limit_norm_series.at(next_limit++);
                    acc.add(r, lim.time, lim.field);
                }
                if (speed_sample) speed_series.push_back({r.time, r.p});
                if (profile_sample) out.profiles.push_back({r.time, r.p});
            });
            out.norms = acc.value();
            out.invariants = monitor.report();
            if (want_speed) {
                out.speed = estimate_wave_speed(speed_series, opt.speed_level, opt.speed_window);
                out.boundary_deviation = endpoint_deviation(speed_series, opt.speed_window);
            }
        } catch (const SolverError& e) {
            throw SolverError(e.message() + detail::eps_tag(m.epsilon()), e.step());
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(e.what()) + detail::eps_tag(m.epsilon()));
        }
        out.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return out;
    };

    std::vector<detail::SweepRun> runs(models.size());
    const unsigned workers = std::min<unsigned>(opt.threads, static_cast<unsigned>(models.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < models.size(); ++i) runs[i] = run_one(i);
    } else {
        std::vector<std::exception_ptr> errors(models.size());
        for (std::size_t base = 0; base < models.size(); base += workers) {
            std::vector<std::jthread> pool;
            for (std::size_t i = base; i < std::min(models.size(), base + workers); ++i)
                pool.emplace_back([&, i] {
                    try {
                        runs[i] = run_one(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                });
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (auto& r : runs) {
        report.err_p.push_back(r.norms.err_p);
        report.err_m.push_back(r.norms.err_m);
        report.speeds.push_back(r.speed);
        report.runtimes.push_back(r.runtime);
        report.invariants.push_back(r.invariants);
        report.boundary_deviation.push_back(r.boundary_deviation);
        report.profiles.push_back(std::move(r.profiles));
    }
    return report;
}

} // namespace singlimit
