#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "singlimit/errors.hpp"

namespace singlimit {

/// Biological parameters of the Wolbachia competition model.
///
/// Rates are per day; densities are dimensionless. Defaults are the
/// Figure-1 parameter block (F_u = 1.12, d_u = 0.27, d_i = 0.3).
struct WolbachiaParams {
    double fu = 1.12;          ///< uninfected fecundity
    double du = 0.27;          ///< uninfected death rate
    double delta = 10.0 / 9.0; ///< infected/uninfected death-rate ratio
    double sf = 0.1;           ///< fecundity reduction of infected females
    double sh = 0.8;           ///< cytoplasmic incompatibility intensity
    double sigma = 1.0;        ///< competition / resource parameter
    double mu = 0.0;           ///< maternal-transmission leakage

    /// Checks every field against its admissible range, without the
    /// cross-field requirement s_f < s_h.
    void validate_ranges() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!(finite(fu) && finite(du) && finite(delta) && finite(sf) && finite(sh) &&
              finite(sigma) && finite(mu)))
            throw ValidationError("parameters must be finite");
        if (!(fu > 0.0)) throw ValidationError("fu must be > 0");
        if (!(du > 0.0)) throw ValidationError("du must be > 0");
        if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
        if (!(delta >= 1.0)) throw ValidationError("delta must be >= 1");
        if (!(sf >= 0.0 && sf < 1.0)) throw ValidationError("sf must lie in [0,1)");
        if (!(sh > 0.0 && sh <= 1.0)) throw ValidationError("sh must lie in (0,1]");
        if (!(mu >= 0.0 && mu < 1.0)) throw ValidationError("mu must lie in [0,1)");
    }

    void validate() const {
        validate_ranges();
        if (!(sf < sh))
            throw ValidationError("sf must be < sh (s_f < s_h is required)");
    }
};

enum class Variant { PerfectTransmission, ImperfectTransmission, AlternativeScaling };

inline std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::PerfectTransmission: return "perfect";
    case Variant::ImperfectTransmission: return "imperfect";
    case Variant::AlternativeScaling: return "alternative";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    if (s == "perfect") return Variant::PerfectTransmission;
    if (s == "imperfect") return Variant::ImperfectTransmission;
    if (s == "alternative" || s == "alt") return Variant::AlternativeScaling;
    throw ValidationError("unknown model variant '" + std::string(s) +
                          "' (expected perfect|imperfect|alternative)");
}

/// Parameters plus the population scaling epsilon and the model variant.
///
/// Perfect transmission and the alternative scaling carry mu = 0. The
/// logistic factor is clipped to its positive part for imperfect
/// transmission and left unclipped otherwise, unless overridden.
class ScaledModel {
public:
    static ScaledModel make(WolbachiaParams params, double epsilon,
                            Variant variant = Variant::PerfectTransmission,
                            std::optional<bool> clip_logistic = std::nullopt) {
        if (variant != Variant::ImperfectTransmission) params.mu = 0.0;
        params.validate();
        if (!(std::isfinite(epsilon) && epsilon > 0.0))
            throw ValidationError("epsilon must be > 0");
        ScaledModel m;
        m.params_ = params;
        m.epsilon_ = epsilon;
        m.variant_ = variant;
        m.clip_ = clip_logistic.value_or(variant == Variant::ImperfectTransmission);
        return m;
    }

    const WolbachiaParams& params() const noexcept { return params_; }
    double epsilon() const noexcept { return epsilon_; }
    Variant variant() const noexcept { return variant_; }
    bool clip_logistic() const noexcept { return clip_; }

    /// Total density at which the logistic factor vanishes, 1/(sigma eps).
    double capacity() const noexcept { return 1.0 / (params_.sigma * epsilon_); }

    bool has_slow_manifold() const noexcept { return variant_ != Variant::AlternativeScaling; }

    ScaledModel with_epsilon(double eps) const {
        return make(params_, eps, variant_, clip_);
    }

private:
    ScaledModel() = default;

    WolbachiaParams params_{};
    double epsilon_ = 1.0;
    Variant variant_ = Variant::PerfectTransmission;
    bool clip_ = false;
};

} // namespace singlimit
