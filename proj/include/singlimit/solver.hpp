#pragma once

// Semi-implicit finite differences in one space dimension: explicit reaction
// at the beginning-of-step state, then an implicit diffusion solve
// (I - dt L) u^{n+1} = u*, with L the conservative stencil for (a(x) u_x)_x.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/grid.hpp"
#include "singlimit/model.hpp"

namespace singlimit {

enum class BoundaryCondition { Neumann, Dirichlet };

struct SolverConfig {
    Grid1D grid{};
    double dt = 0.005;
    double t_end = 125.0;
    std::vector<double> diffusivity;   ///< a(x) sampled at the grid nodes
    std::size_t output_every = 5000;   ///< steps between stored snapshots
    bool clip_negatives = true;
    BoundaryCondition boundary = BoundaryCondition::Neumann;

    static SolverConfig uniform(const Grid1D& grid, double dt, double t_end, double a,
                                std::size_t output_every = 5000) {
        SolverConfig c;
        c.grid = grid;
        c.dt = dt;
        c.t_end = t_end;
        c.diffusivity.assign(grid.nx, a);
        c.output_every = output_every;
        c.validate();
        return c;
    }

    void validate() const {
        grid.validate();
        if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("dt must be > 0");
        if (!(std::isfinite(t_end) && t_end >= dt)) throw ValidationError("t_end must be >= dt");
        if (diffusivity.size() != grid.nx)
            throw ValidationError("diffusivity must be sampled at every grid node");
        for (double a : diffusivity)
            if (!(std::isfinite(a) && a > 0.0)) throw ValidationError("diffusivity must be > 0");
        if (output_every == 0) throw ValidationError("output_every must be >= 1");
    }

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }
    double time_of(std::size_t step) const { return static_cast<double>(step) * dt; }
};

/// Tridiagonal linear system; lower/upper have one entry fewer than diag.
struct TridiagonalSystem {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;
    std::vector<double> rhs;

    std::size_t size() const noexcept { return diag.size(); }

    bool diagonally_dominant() const {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            double off = 0.0;
            if (i > 0) off += std::abs(lower[i - 1]);
            if (i + 1 < n) off += std::abs(upper[i]);
            if (std::abs(diag[i]) < off) return false;
        }
        return true;
    }
};

/// Thomas algorithm. O(n); throws on a zero pivot.
inline std::vector<double> tridiagonal_solve(const TridiagonalSystem& sys) {
    const std::size_t n = sys.size();
    if (n == 0) return {};
    if (sys.lower.size() + 1 != n || sys.upper.size() + 1 != n || sys.rhs.size() != n)
        throw ValidationError("tridiagonal system has inconsistent sizes");
    std::vector<double> c(n, 0.0), d(n, 0.0);
    double denom = sys.diag[0];
    if (denom == 0.0) throw std::runtime_error("zero pivot in tridiagonal solve at row 0");
    if (n > 1) c[0] = sys.upper[0] / denom;
    d[0] = sys.rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = sys.diag[i] - sys.lower[i - 1] * c[i - 1];
        if (denom == 0.0)
            throw std::runtime_error("zero pivot in tridiagonal solve at row " + std::to_string(i));
        if (i + 1 < n) c[i] = sys.upper[i] / denom;
        d[i] = (sys.rhs[i] - sys.lower[i - 1] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
}

/// Builds I - dt L_h. Face diffusivities are arithmetic means of the
/// neighbouring nodes. Neumann walls use the mirrored ghost u_{-1} = u_1, so
/// boundary rows read diag 1 + 2c, off-diagonal -2c. Dirichlet rows are identity.
/// The returned rhs is zero-filled.
inline TridiagonalSystem assemble_diffusion(const SolverConfig& config) {
    config.validate();
    const std::size_t n = config.grid.nx;
    const double dx = config.grid.dx();
    const double k = config.dt / (dx * dx);
    const auto& a = config.diffusivity;

    TridiagonalSystem s;
    s.lower.assign(n - 1, 0.0);
    s.upper.assign(n - 1, 0.0);
    s.diag.assign(n, 1.0);
    s.rhs.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double west = k * 0.5 * (a[i - 1] + a[i]);
        const double east = k * 0.5 * (a[i] + a[i + 1]);
        s.lower[i - 1] = -west;
        s.upper[i] = -east;
        s.diag[i] = 1.0 + west + east;
    }
    if (config.boundary == BoundaryCondition::Neumann) {
        const double first = k * 0.5 * (a[0] + a[1]);
        const double last = k * 0.5 * (a[n - 2] + a[n - 1]);
        s.diag[0] = 1.0 + 2.0 * first;
        s.upper[0] = -2.0 * first;
        s.diag[n - 1] = 1.0 + 2.0 * last;
        s.lower[n - 2] = -2.0 * last;
    }
    return s;
}

/// Pre-factored implicit diffusion operator.
class DiffusionOperator {
public:
    explicit DiffusionOperator(const SolverConfig& config)
        : system_(assemble_diffusion(config)), boundary_(config.boundary) {
        const std::size_t n = system_.size();
        factor_.assign(n, 0.0);
        inv_pivot_.assign(n, 0.0);
        double denom = system_.diag[0];
        inv_pivot_[0] = 1.0 / denom;
        factor_[0] = system_.upper[0] * inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i) {
            denom = system_.diag[i] - system_.lower[i - 1] * factor_[i - 1];
            inv_pivot_[i] = 1.0 / denom;
            if (i + 1 < n) factor_[i] = system_.upper[i] * inv_pivot_[i];
        }
    }

    /// Overwrites rhs with the solution of (I - dt L) v = rhs.
    void solve_in_place(std::span<double> rhs) const {
        const std::size_t n = rhs.size();
        rhs[0] *= inv_pivot_[0];
        for (std::size_t i = 1; i < n; ++i)
            rhs[i] = (rhs[i] - system_.lower[i - 1] * rhs[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= factor_[i] * rhs[i + 1];
    }

    const TridiagonalSystem& system() const noexcept { return system_; }
    BoundaryCondition boundary() const noexcept { return boundary_; }

private:
    TridiagonalSystem system_;
    BoundaryCondition boundary_;
    std::vector<double> factor_;
    std::vector<double> inv_pivot_;
};

/// Infected and uninfected density fields at one time.
struct PopulationState {
    Field ni;
    Field nu;
    double time = 0.0;
};

/// Post-step clamping record. Values within the round-off band are clamped
/// silently; anything beyond it is counted as flagged.
struct StepDiagnostics {
    std::size_t clamped = 0;
    std::size_t flagged = 0;
    double worst_excursion = 0.0; ///< largest flagged distance outside the admissible range
};

inline constexpr double kRoundoffBand = 1e-12;

namespace detail {

inline void finish_species(std::span<double> v, bool clip, double lo, double hi,
                           StepDiagnostics& diag, std::size_t step, const char* name) {
    for (double& x : v) {
        if (!std::isfinite(x))
            throw SolverError(std::string("non-finite ") + name + " after step", step);
        if (x < lo) {
            if (x >= lo - kRoundoffBand) {
                if (clip) x = lo, ++diag.clamped;
            } else {
                ++diag.flagged;
                diag.worst_excursion = std::max(diag.worst_excursion, lo - x);
            }
        } else if (x > hi) {
            if (x <= hi + kRoundoffBand) {
                if (clip) x = hi, ++diag.clamped;
            } else {
                ++diag.flagged;
                diag.worst_excursion = std::max(diag.worst_excursion, x - hi);
            }
        }
    }
}

} // namespace detail

/// Steps the two-population system in primitive variables (ni, nu).
class SystemStepper {
public:
    SystemStepper(const model::ScaledModel& m, const SolverConfig& config)
        : model_(m), config_(config), diffusion_(config) {}

    void step(PopulationState& s, std::size_t step_index) {
        auto& ni = s.ni.values;
        auto& nu = s.nu.values;
        const std::size_t n = ni.size();
        if (n != config_.grid.nx || nu.size() != n)
            throw ValidationError("state does not match the solver grid");
        const double dt = config_.dt;
        const double left_i = ni[0], right_i = ni[n - 1], left_u = nu[0], right_u = nu[n - 1];
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = model::detail::kinetics(model_, ni[i], nu[i]);
            ni[i] += dt * r.infected;
            nu[i] += dt * r.uninfected;
        }
        if (config_.boundary == BoundaryCondition::Dirichlet) {
            ni[0] = left_i, ni[n - 1] = right_i;
            nu[0] = left_u, nu[n - 1] = right_u;
        }
        diffusion_.solve_in_place(ni);
        diffusion_.solve_in_place(nu);
        const double inf = std::numeric_limits<double>::infinity();
        detail::finish_species(ni, config_.clip_negatives, 0.0, inf, diag_, step_index, "ni");
        detail::finish_species(nu, config_.clip_negatives, 0.0, inf, diag_, step_index, "nu");
        s.time = config_.time_of(step_index + 1);
    }

    const StepDiagnostics& diagnostics() const noexcept { return diag_; }
    const SolverConfig& config() const noexcept { return config_; }
    const model::ScaledModel& scaled_model() const noexcept { return model_; }

private:
    model::ScaledModel model_;
    SolverConfig config_;
    DiffusionOperator diffusion_;
    StepDiagnostics diag_;
};

/// Steps a scalar frequency equation p_t = (a p_x)_x + reaction(p).
class ScalarStepper {
public:
    ScalarStepper(std::function<double(double)> reaction, const SolverConfig& config)
        : reaction_(std::move(reaction)), config_(config), diffusion_(config) {}

    void step(Field& p, double& time, std::size_t step_index) {
        auto& v = p.values;
        const std::size_t n = v.size();
        if (n != config_.grid.nx) throw ValidationError("field does not match the solver grid");
        const double left = v[0], right = v[n - 1];
        for (std::size_t i = 0; i < n; ++i) v[i] += config_.dt * reaction_(v[i]);
        if (config_.boundary == BoundaryCondition::Dirichlet) v[0] = left, v[n - 1] = right;
        diffusion_.solve_in_place(v);
        detail::finish_species(v, true, 0.0, 1.0, diag_, step_index, "p");
        time = config_.time_of(step_index + 1);
    }

    const StepDiagnostics& diagnostics() const noexcept { return diag_; }
    const SolverConfig& config() const noexcept { return config_; }

private:
    std::function<double(double)> reaction_;
    SolverConfig config_;
    DiffusionOperator diffusion_;
    StepDiagnostics diag_;
};

/// One semi-implicit step of the two-population system.
inline PopulationState step_system(const model::ScaledModel& m, const PopulationState& state,
                                   const SolverConfig& config, std::size_t step_index = 0) {
    for (const auto* f : {&state.ni, &state.nu})
        for (double v : f->values)
            if (v < 0.0) throw ValidationError("step_system requires a non-negative state");
    SystemStepper stepper(m, config);
    PopulationState next = state;
    stepper.step(next, step_index);
    return next;
}

/// One semi-implicit step of a scalar reaction-diffusion equation on [0, 1].
inline Field step_scalar(const std::function<double(double)>& reaction, const Field& p,
                         const SolverConfig& config, std::size_t step_index = 0) {
    for (double v : p.values)
        if (!(v >= -kRoundoffBand && v <= 1.0 + kRoundoffBand))
            throw ValidationError("step_scalar requires 0 <= p <= 1");
    ScalarStepper stepper(reaction, config);
    Field next = p;
    double t = 0.0;
    stepper.step(next, t, step_index);
    return next;
}

} // namespace singlimit
