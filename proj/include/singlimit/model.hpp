#pragma once

// Closed-form mathematics of the Wolbachia competition systems: kinetics,
// the slow-manifold function H and its root h, the limiting bistable
// reaction, equilibria with stability, and the slow-manifold sufficient-condition
// audit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/params.hpp"

namespace singlimit::model {

using singlimit::ScaledModel;

struct Rates {
    double infected = 0.0;
    double uninfected = 0.0;
};

namespace detail {

/// Birth and death contributions of the kinetics, kept separate so callers
/// can measure residuals relative to the gross terms.
struct KineticTerms {
    double birth_i, death_i, birth_u, death_u;
};

/// Evaluates the kinetics for any real (ni, nu); no domain checks. The
/// frequency follows the vacuum convention p = 0 when ni + nu == 0.
inline KineticTerms kinetic_terms(const WolbachiaParams& q, double eps, Variant variant,
                                  bool clip, double ni, double nu) noexcept {
    const double total = ni + nu;
    const double p = total != 0.0 ? ni / total : 0.0;
    double logistic = variant == Variant::AlternativeScaling ? 1.0 - eps * q.sigma * total
                                                             : 1.0 / eps - q.sigma * total;
    if (clip) logistic = std::max(logistic, 0.0);
    const double mu = variant == Variant::ImperfectTransmission ? q.mu : 0.0;
    KineticTerms t{};
    t.birth_i = (1.0 - mu) * (1.0 - q.sf) * q.fu * ni * logistic;
    t.death_i = q.delta * q.du * ni;
    t.birth_u = q.fu * (nu * (1.0 - q.sh * p) + mu * (1.0 - q.sf) * ni * p) * logistic;
    t.death_u = q.du * nu;
    return t;
}

inline Rates kinetics(const WolbachiaParams& q, double eps, Variant variant, bool clip,
                      double ni, double nu) noexcept {
    const auto t = kinetic_terms(q, eps, variant, clip, ni, nu);
    return {t.birth_i - t.death_i, t.birth_u - t.death_u};
}

inline Rates kinetics(const ScaledModel& m, double ni, double nu) noexcept {
    return kinetics(m.params(), m.epsilon(), m.variant(), m.clip_logistic(), ni, nu);
}

inline void require_frequency(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("frequency p must lie in [0,1]");
}

inline void require_manifold(const ScaledModel& m) {
    if (!m.has_slow_manifold())
        throw ValidationError("the alternative scaling has no slow manifold n = h(p)");
}

} // namespace detail

/// Reaction right-hand sides (without diffusion) of the selected variant.
inline Rates reaction_rates(const ScaledModel& m, double ni, double nu) {
    if (!std::isfinite(ni) || !std::isfinite(nu)) throw ValidationError("densities must be finite");
    if (ni < 0.0 || nu < 0.0) throw ValidationError("densities must be non-negative");
    return detail::kinetics(m, ni, nu);
}

/// Largest per-species |rate| relative to the gross birth + death magnitude.
inline double kinetics_residual(const ScaledModel& m, double ni, double nu) {
    const auto t = detail::kinetic_terms(m.params(), m.epsilon(), m.variant(), m.clip_logistic(),
                                         ni, nu);
    auto rel = [](double birth, double death) {
        const double scale = std::abs(birth) + std::abs(death);
        return scale > 0.0 ? std::abs(birth - death) / scale : 0.0;
    };
    return std::max(rel(t.birth_i, t.death_i), rel(t.birth_u, t.death_u));
}

/// s_h' p^2 - (s_f + s_h') p + 1 with s_h' = s_h + mu (1 - s_f).
inline double transmission_quadratic(const WolbachiaParams& q, double p) noexcept {
    const double leak = q.mu * (1.0 - q.sf);
    return (q.sh + leak) * p * p - (q.sf + q.sh + leak) * p + 1.0;
}

/// Per-capita growth of the infected population in reduced variables.
inline double growth_f1(const ScaledModel& m, double n, double /*p*/) {
    detail::require_manifold(m);
    const auto& q = m.params();
    return q.sigma * n * (1.0 - q.mu) * (1.0 - q.sf) * q.fu - q.delta * q.du;
}

/// Per-capita growth of the uninfected population in reduced variables.
/// With leakage (mu > 0) the infected-born uninfected offspring make it
/// singular at p = 1.
inline double growth_f2(const ScaledModel& m, double n, double p) {
    detail::require_manifold(m);
    const auto& q = m.params();
    double birth = (1.0 - q.sh * p);
    if (q.mu > 0.0) {
        if (p >= 1.0) throw ValidationError("growth_f2 is singular at p = 1 when mu > 0");
        birth += q.mu * (1.0 - q.sf) * p * p / (1.0 - p);
    }
    return q.sigma * n * q.fu * birth - q.du;
}

namespace detail {

inline double big_h_raw(const WolbachiaParams& q, double n, double p) noexcept {
    return -q.sigma * q.fu * n * transmission_quadratic(q, p) + q.du * ((q.delta - 1.0) * p + 1.0);
}

/// min over [0,1] of the transmission quadratic.
inline double transmission_quadratic_min(const WolbachiaParams& q) noexcept {
    const double leak = q.mu * (1.0 - q.sf);
    const double vertex = std::clamp((q.sf + q.sh + leak) / (2.0 * (q.sh + leak)), 0.0, 1.0);
    return transmission_quadratic(q, vertex);
}

} // namespace detail

/// H(n, p) = -p F1 - (1-p) F2 in closed polynomial form. Defined for every
/// real n so finite differences may probe across n = 0.
inline double big_h(const ScaledModel& m, double n, double p) {
    detail::require_manifold(m);
    detail::require_frequency(p);
    return detail::big_h_raw(m.params(), n, p);
}

/// The slow manifold: unique positive root of H(., p). Independent of eps.
inline double h_of_p(const ScaledModel& m, double p) {
    detail::require_manifold(m);
    detail::require_frequency(p);
    const auto& q = m.params();
    return q.du / (q.sigma * q.fu) * ((q.delta - 1.0) * p + 1.0) / transmission_quadratic(q, p);
}

/// max over p in [0,1] of h(p): dense sampling followed by golden-section refinement.
inline double max_h(const ScaledModel& m) {
    constexpr int samples = 2000;
    int best = 0;
    double best_val = h_of_p(m, 0.0);
    for (int k = 1; k <= samples; ++k) {
        const double v = h_of_p(m, static_cast<double>(k) / samples);
        if (v > best_val) best_val = v, best = k;
    }
    double lo = std::max(0, best - 1) / double(samples);
    double hi = std::min(samples, best + 1) / double(samples);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100 && hi - lo > 1e-14; ++it) {
        const double a = hi - g * (hi - lo);
        const double b = lo + g * (hi - lo);
        if (h_of_p(m, a) < h_of_p(m, b)) lo = a; else hi = b;
    }
    return std::max(best_val, h_of_p(m, 0.5 * (lo + hi)));
}

/// B > 0 with dH/dn <= -B on [0, inf) x [0, 1].
inline double dn_h_bound(const ScaledModel& m) {
    detail::require_manifold(m);
    const auto& q = m.params();
    if (!(q.sf < q.sh)) throw ValidationError("dn_h_bound requires s_f < s_h");
    double bound;
    if (q.mu == 0.0) {
        bound = q.sigma * q.fu * (1.0 - (q.sf + q.sh) * (q.sf + q.sh) / (4.0 * q.sh));
    } else {
        bound = q.sigma * q.fu * detail::transmission_quadratic_min(q);
    }
    if (!(bound > 0.0)) throw ValidationError("dH/dn bound is not positive");
    return bound;
}

namespace detail {

inline double limit_reaction_raw(const WolbachiaParams& q, double p) noexcept {
    const double denom = transmission_quadratic(q, p);
    if (q.mu == 0.0) {
        const double theta = (q.sf + q.delta - 1.0) / (q.delta * q.sh);
        return q.delta * q.du * q.sh * p * (1.0 - p) * (p - theta) / denom;
    }
    return q.du * p *
           ((1.0 - q.mu) * (1.0 - q.sf) * ((q.delta - 1.0) * p + 1.0) / denom - q.delta);
}

} // namespace detail

/// Limiting bistable reaction r(p) (mu = 0) or r_mu(p) (mu > 0).
inline double limit_reaction(const ScaledModel& m, double p) {
    detail::require_manifold(m);
    detail::require_frequency(p);
    return detail::limit_reaction_raw(m.params(), p);
}

/// Unchecked r(p) bound to the model parameters, for the scalar time stepper.
inline std::function<double(double)> limit_reaction_fn(const ScaledModel& m) {
    detail::require_manifold(m);
    return [q = m.params()](double p) { return detail::limit_reaction_raw(q, p); };
}

namespace detail {

/// Sign-equivalent of r_mu(p)/p on [0,1]: a concave quadratic in p.
inline double imperfect_sign_quadratic(const WolbachiaParams& q, double p) noexcept {
    return (1.0 - q.mu) * (1.0 - q.sf) * ((q.delta - 1.0) * p + 1.0) -
           q.delta * transmission_quadratic(q, p);
}

inline double bisect(auto&& f, double lo, double hi, double tol = 1e-14) {
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) lo = mid, flo = fm;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Interior roots (theta, p*_W) of r_mu in (0, 1), found by bisection.
inline std::pair<double, double> imperfect_roots(const ScaledModel& m) {
    detail::require_manifold(m);
    const auto& q = m.params();
    const double leak = q.mu * (1.0 - q.sf);
    const double a = q.delta * (q.sh + leak);
    const double b = (1.0 - q.mu) * (1.0 - q.sf) * (q.delta - 1.0) + q.delta * (q.sf + q.sh + leak);
    const double vertex = b / (2.0 * a);
    auto g = [&](double p) { return detail::imperfect_sign_quadratic(q, p); };
    if (!(vertex > 0.0 && vertex < 1.0) || !(g(vertex) > 0.0) || !(g(0.0) < 0.0))
        throw ValidationError("r_mu is not bistable for these parameters (Delta <= 0)");
    const double lower = detail::bisect(g, 0.0, vertex);
    // With mu == 0 the upper root is exactly 1.
    const double upper = g(1.0) < 0.0 ? detail::bisect(g, vertex, 1.0) : 1.0;
    return {lower, upper};
}

/// Bistability condition s_f + delta - 1 < delta s_h (mu = 0) or Delta > 0 (mu > 0).
inline bool is_bistable(const WolbachiaParams& q) {
    if (q.mu == 0.0) return q.sf + q.delta - 1.0 < q.delta * q.sh && q.sf + q.delta - 1.0 > 0.0;
    try {
        auto m = ScaledModel::make(q, 1.0, Variant::ImperfectTransmission);
        (void)imperfect_roots(m);
        return true;
    } catch (const ValidationError&) {
        return false;
    }
}

/// Unstable interior root of the limiting reaction (invasion threshold).
inline double threshold_theta(const ScaledModel& m) {
    detail::require_manifold(m);
    const auto& q = m.params();
    if (q.mu == 0.0) {
        if (!(q.sf + q.delta - 1.0 < q.delta * q.sh))
            throw ValidationError("bistability condition s_f + delta - 1 < delta s_h violated");
        const double theta = (q.sf + q.delta - 1.0) / (q.delta * q.sh);
        if (!(theta > 0.0)) throw ValidationError("threshold theta is not in (0,1)");
        return theta;
    }
    return imperfect_roots(m).first;
}

/// Stable invaded frequency: 1 without leakage, p*_W < 1 with leakage.
inline double invasion_frequency(const ScaledModel& m) {
    if (m.params().mu == 0.0) return 1.0;
    return imperfect_roots(m).second;
}

/// Discriminant of the closed-form leaky roots written with (delta - 1 + sign mu)(1 - s_f);
/// both signs are provided, matching_discriminant_sign selects the one that holds.
inline double imperfect_discriminant(const WolbachiaParams& q, int sign) {
    const double leak = q.mu * (1.0 - q.sf);
    const double b = q.delta * (q.sf + q.sh) + (q.delta - 1.0 + sign * q.mu) * (1.0 - q.sf);
    return b * b - 4.0 * q.delta * (q.sh + leak) * (q.delta - (1.0 - q.mu) * (1.0 - q.sf));
}

/// Closed-form roots (b - sqrt(Delta))/(2a), (b + sqrt(Delta))/(2a) for the given
/// sign convention. NaNs when that Delta is negative.
inline std::pair<double, double> imperfect_closed_form_roots(const WolbachiaParams& q, int sign) {
    const double disc = imperfect_discriminant(q, sign);
    if (disc < 0.0) return {std::nan(""), std::nan("")};
    const double a = 2.0 * q.delta * (q.sh + q.mu * (1.0 - q.sf));
    const double b = q.delta * (q.sf + q.sh) + (q.delta - 1.0 + sign * q.mu) * (1.0 - q.sf);
    return {(b - std::sqrt(disc)) / a, (b + std::sqrt(disc)) / a};
}

/// Which sign (+1 or -1) of mu reproduces the bisection roots to 1e-9;
/// +1 when both do (mu = 0), 0 when neither does.
inline int matching_discriminant_sign(const ScaledModel& m) {
    const auto [lo, hi] = imperfect_roots(m);
    for (int sign : {+1, -1}) {
        const auto [a, b] = imperfect_closed_form_roots(m.params(), sign);
        if (std::abs(a - lo) < 1e-9 && std::abs(b - hi) < 1e-9) return sign;
    }
    return 0;
}

enum class EquilibriumLabel { Invasion, Extinction, Coexistence, Origin };
enum class Stability { Stable, Unstable };

inline std::string_view to_string(EquilibriumLabel l) {
    switch (l) {
    case EquilibriumLabel::Invasion: return "Invasion";
    case EquilibriumLabel::Extinction: return "Extinction";
    case EquilibriumLabel::Coexistence: return "Coexistence";
    case EquilibriumLabel::Origin: return "Origin";
    }
    return "?";
}

inline std::string_view to_string(Stability s) {
    return s == Stability::Stable ? "Stable" : "Unstable";
}

struct Equilibrium {
    double ni = 0.0;
    double nu = 0.0;
    EquilibriumLabel label = EquilibriumLabel::Origin;
    Stability stability = Stability::Unstable;
    bool marginal = false;
};

struct StabilityVerdict {
    Stability stability = Stability::Unstable;
    bool marginal = false;
    double max_real_part = 0.0;
};

/// Linear stability of a spatially homogeneous steady state from a
/// central-difference Jacobian of the kinetics.
inline StabilityVerdict classify_stability(const ScaledModel& m, double ni, double nu) {
    if (!std::isfinite(ni) || !std::isfinite(nu) || ni < 0.0 || nu < 0.0)
        throw ValidationError("equilibrium densities must be finite and non-negative");
    if (kinetics_residual(m, ni, nu) > 1e-8)
        throw ValidationError("classify_stability: state is not an equilibrium");

    const double step = 1e-6 * std::max(1.0, std::abs(ni) + std::abs(nu));
    auto f = [&](double a, double b) { return detail::kinetics(m, a, b); };
    const Rates pi = f(ni + step, nu), mi = f(ni - step, nu);
    const Rates pu = f(ni, nu + step), mu = f(ni, nu - step);
    const double j11 = (pi.infected - mi.infected) / (2.0 * step);
    const double j21 = (pi.uninfected - mi.uninfected) / (2.0 * step);
    const double j12 = (pu.infected - mu.infected) / (2.0 * step);
    const double j22 = (pu.uninfected - mu.uninfected) / (2.0 * step);

    const double half_trace = 0.5 * (j11 + j22);
    const double disc = 0.25 * (j11 - j22) * (j11 - j22) + j12 * j21;
    const double max_re = disc >= 0.0 ? half_trace + std::sqrt(disc) : half_trace;

    StabilityVerdict v;
    v.max_real_part = max_re;
    v.marginal = std::abs(max_re) < 1e-8;
    v.stability = (max_re < 0.0 && !v.marginal) ? Stability::Stable : Stability::Unstable;
    return v;
}

inline StabilityVerdict classify_stability(const ScaledModel& m, const Equilibrium& e) {
    return classify_stability(m, e.ni, e.nu);
}

/// The four homogeneous steady states, ordered Invasion, Extinction,
/// Coexistence, Origin, each with its stability label.
inline std::vector<Equilibrium> equilibria(const ScaledModel& m) {
    const auto& q = m.params();
    std::vector<Equilibrium> out;

    if (m.variant() == Variant::ImperfectTransmission && q.mu > 0.0) {
        const auto [p_c, p_w] = imperfect_roots(m);
        const double n_star = q.delta * q.du / (q.sigma * (1.0 - q.mu) * (1.0 - q.sf) * q.fu);
        const double total = m.capacity() - n_star;
        const double total_e = m.capacity() - q.du / (q.sigma * q.fu);
        if (!(total > 0.0) || !(total_e > 0.0))
            throw ValidationError("eps too large: equilibria leave the positive quadrant");
        out.push_back({p_w * total, (1.0 - p_w) * total, EquilibriumLabel::Invasion});
        out.push_back({0.0, total_e, EquilibriumLabel::Extinction});
        out.push_back({p_c * total, (1.0 - p_c) * total, EquilibriumLabel::Coexistence});
    } else {
        if (!(q.sf + q.delta - 1.0 < q.delta * q.sh))
            throw ValidationError("coexistence state requires s_f + delta - 1 < delta s_h");
        // The alternative scaling's logistic factor is eps times the perfect one.
        const double fu = m.variant() == Variant::AlternativeScaling ? m.epsilon() * q.fu : q.fu;
        const double cap = m.capacity();
        const double ni_w = cap - q.du * q.delta / (q.sigma * fu * (1.0 - q.sf));
        const double nu_e = cap - q.du / (q.sigma * fu);
        if (!(ni_w > 0.0) || !(nu_e > 0.0))
            throw ValidationError("eps too large: equilibria leave the positive quadrant");
        const double ds = q.delta * q.sh;
        out.push_back({ni_w, 0.0, EquilibriumLabel::Invasion});
        out.push_back({0.0, nu_e, EquilibriumLabel::Extinction});
        out.push_back({ni_w * (q.delta - (1.0 - q.sf)) / ds,
                       ni_w * (q.delta * (q.sh - 1.0) + (1.0 - q.sf)) / ds,
                       EquilibriumLabel::Coexistence});
    }
    out.push_back({0.0, 0.0, EquilibriumLabel::Origin});

    for (auto& e : out) {
        const auto v = classify_stability(m, e);
        e.stability = v.stability;
        e.marginal = v.marginal;
    }
    return out;
}

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    double worst = 0.0; ///< worst sampled value of the checked quantity
    double n1 = 0.0;    ///< location of the worst sample (densities or p in n1)
    double n2 = 0.0;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }

    const AssumptionCheck& get(std::string_view name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw std::out_of_range("no assumption check named " + std::string(name));
    }
};

/// Numerically audits the sufficient conditions for a unique slow manifold:
///  - "dnH_bound": sum_ij n_i n_j d_j f_i <= -B (n1 + n2)^2 on the triangle
///    n1 + n2 <= 1/(sigma eps); worst is max of the left side over (n1+n2)^2,
///  - "boundary_flux": n1 f1 + n2 f2 < 0 on the hypotenuse,
///  - "H_at_zero": H(0, p) > 0 on 101 frequencies,
///  - "bistability": the threshold lies in (0, 1).
/// Parameters are not required to satisfy s_f < s_h; violations are report entries.
inline AssumptionReport check_assumptions(const WolbachiaParams& params, double eps,
                                          Variant variant, int samples) {
    if (samples < 10) throw ValidationError("check_assumptions needs >= 10 samples per axis");
    if (variant == Variant::AlternativeScaling)
        throw ValidationError("the sufficient conditions do not apply to the alternative scaling");
    WolbachiaParams q = params;
    if (variant == Variant::PerfectTransmission) q.mu = 0.0;
    q.validate_ranges();
    if (!(std::isfinite(eps) && eps > 0.0)) throw ValidationError("epsilon must be > 0");

    const double cap = 1.0 / (q.sigma * eps);
    AssumptionReport report;

    // The flux along a ray s -> s n is quadratic in s (p is constant), so a
    // wide central difference is exact up to rounding.
    {
        const double bound = q.sigma * q.fu * detail::transmission_quadratic_min(q);

        auto flux = [&](double a, double b) {
            const Rates r = detail::kinetics(q, eps, variant, false, a, b);
            return r.infected + r.uninfected;
        };
        AssumptionCheck c{"dnH_bound", false, -std::numeric_limits<double>::infinity(), 0, 0, {}};
        constexpr double eta = 0.5;
        for (int i = 0; i <= samples; ++i) {
            for (int j = 0; i + j <= samples; ++j) {
                if (i == 0 && j == 0) continue;
                const double a = cap * i / samples, b = cap * j / samples;
                const double total = a + b;
                const double lhs = (flux((1 + eta) * a, (1 + eta) * b) -
                                    flux((1 - eta) * a, (1 - eta) * b)) / (2 * eta) -
                                   flux(a, b);
                const double ratio = lhs / (total * total);
                if (ratio > c.worst) c.worst = ratio, c.n1 = a, c.n2 = b;
            }
        }
        if (!(q.sf < q.sh)) {
            c.detail = "s_f < s_h violated; no admissible B";
        } else if (!(bound > 0.0)) {
            c.detail = "closed-form bound B is not positive";
        } else {
            c.passed = c.worst <= -bound * (1.0 - 1e-9);
            c.detail = "B = " + std::to_string(bound);
        }
        report.checks.push_back(std::move(c));
    }

    {
        AssumptionCheck c{"boundary_flux", false, -std::numeric_limits<double>::infinity(), 0, 0, {}};
        for (int k = 0; k <= samples; ++k) {
            const double a = cap * k / samples, b = cap - a;
            const Rates r = detail::kinetics(q, eps, variant, variant == Variant::ImperfectTransmission,
                                             a, b);
            const double v = r.infected + r.uninfected;
            if (v > c.worst) c.worst = v, c.n1 = a, c.n2 = b;
        }
        c.passed = c.worst < 0.0;
        report.checks.push_back(std::move(c));
    }

    {
        AssumptionCheck c{"H_at_zero", false, std::numeric_limits<double>::infinity(), 0, 0, {}};
        for (int k = 0; k <= 100; ++k) {
            const double p = k / 100.0;
            const double v = detail::big_h_raw(q, 0.0, p);
            if (v < c.worst) c.worst = v, c.n1 = p;
        }
        c.passed = c.worst > 0.0;
        report.checks.push_back(std::move(c));
    }

    {
        AssumptionCheck c{"bistability", false, std::nan(""), 0, 0, {}};
        if (q.mu == 0.0) {
            c.worst = (q.sf + q.delta - 1.0) / (q.delta * q.sh);
            c.passed = c.worst > 0.0 && c.worst < 1.0;
            if (!c.passed) c.detail = "s_f + delta - 1 < delta s_h violated";
        } else if (q.sf < q.sh) {
            try {
                auto m = ScaledModel::make(q, eps, Variant::ImperfectTransmission);
                c.worst = imperfect_roots(m).first;
                c.passed = true;
            } catch (const ValidationError& e) {
                c.detail = e.what();
            }
        } else {
            c.detail = "s_f < s_h violated";
        }
        report.checks.push_back(std::move(c));
    }
    return report;
}

inline AssumptionReport check_assumptions(const ScaledModel& m, int samples) {
    return check_assumptions(m.params(), m.epsilon(), m.variant(), samples);
}

} // namespace singlimit::model
