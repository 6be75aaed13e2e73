#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/grid.hpp"
#include "singlimit/model.hpp"
#include "singlimit/solver.hpp"

namespace singlimit {

/// Reduced total population n, frequency p and slow-manifold residual
/// m = n - h(p). Under the alternative scaling m is NaN (not applicable).
struct ReducedFields {
    Field n;
    Field p;
    Field m;
    double time = 0.0;

    bool has_residual() const { return !m.values.empty() && !std::isnan(m.values.front()); }
};

/// Reduced total population for a total density: 1/(sigma eps) - N, or
/// eps sigma N under the alternative scaling.
inline double reduced_population(const model::ScaledModel& m, double total) noexcept {
    if (m.variant() == Variant::AlternativeScaling)
        return m.epsilon() * m.params().sigma * total;
    return m.capacity() - total;
}

inline double total_from_reduced(const model::ScaledModel& m, double n) noexcept {
    if (m.variant() == Variant::AlternativeScaling) return n / (m.epsilon() * m.params().sigma);
    return m.capacity() - n;
}

/// Infected fraction with the vacuum convention p = 0.
inline double frequency(double ni, double nu) noexcept {
    const double total = ni + nu;
    return total > 0.0 ? ni / total : 0.0;
}

inline ReducedFields to_reduced(const model::ScaledModel& m, const PopulationState& s) {
    if (!(s.ni.grid == s.nu.grid) || s.ni.size() != s.nu.size())
        throw ValidationError("population fields live on different grids");
    const Grid1D& g = s.ni.grid;
    ReducedFields r{Field(g), Field(g), Field(g), s.time};
    const bool manifold = m.has_slow_manifold();
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double a = s.ni[i], b = s.nu[i];
        if (!(a >= 0.0 && b >= 0.0)) throw ValidationError("negative density in to_reduced");
        const double p = frequency(a, b);
        const double n = reduced_population(m, a + b);
        r.n[i] = n;
        r.p[i] = p;
        r.m[i] = manifold ? n - model::h_of_p(m, p) : std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

/// Inverse map: ni = p N, nu = (1 - p) N.
inline PopulationState from_reduced(const model::ScaledModel& m, const Field& n, const Field& p,
                                    double time = 0.0) {
    if (!(n.grid == p.grid)) throw ValidationError("reduced fields live on different grids");
    PopulationState s{Field(n.grid), Field(n.grid), time};
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double total = total_from_reduced(m, n[i]);
        s.ni[i] = p[i] * total;
        s.nu[i] = (1.0 - p[i]) * total;
    }
    return s;
}

struct ErrorNorms {
    double err_p = 0.0;
    double err_m = 0.0;
};

/// Accumulates ||p^eps - p^0|| and ||M|| in the discrete L2(0,T; L2) norm
/// snapshot by snapshot. Both series must share grid and output times exactly.
class ErrorNormAccumulator {
public:
    explicit ErrorNormAccumulator(double horizon) : p_(horizon), m_(horizon) {}

    void add(const ReducedFields& reduced, double limit_time, const Field& limit_p) {
        if (reduced.time != limit_time)
            throw ValidationError("error_norms: output times differ (no interpolation)");
        if (!(reduced.p.grid == limit_p.grid))
            throw ValidationError("error_norms: grids differ (no interpolation)");
        Field diff(limit_p.grid);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = reduced.p[i] - limit_p[i];
        p_.add(reduced.time, diff);
        m_.add(reduced.time, reduced.m);
    }

    ErrorNorms value() const { return {p_.value(), m_.value()}; }
    std::size_t count() const noexcept { return p_.count(); }

private:
    SpaceTimeL2 p_;
    SpaceTimeL2 m_;
};

inline ErrorNorms error_norms(std::span<const ReducedFields> reduced,
                              std::span<const TimedField> limit, double t_end) {
    if (reduced.size() != limit.size())
        throw ValidationError("error_norms: series lengths differ");
    if (reduced.empty()) throw ValidationError("error_norms: empty series");
    ErrorNormAccumulator acc(t_end);
    for (std::size_t k = 0; k < reduced.size(); ++k) acc.add(reduced[k], limit[k].time, limit[k].field);
    return acc.value();
}

/// Same, integrating over the full span of the series.
inline ErrorNorms error_norms(std::span<const ReducedFields> reduced,
                              std::span<const TimedField> limit) {
    if (reduced.empty()) throw ValidationError("error_norms: empty series");
    return error_norms(reduced, limit, reduced.back().time);
}

} // namespace singlimit
