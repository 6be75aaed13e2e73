#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "singlimit/errors.hpp"

namespace singlimit {

/// Uniform vertex-centred grid on [xmin, xmax].
struct Grid1D {
    double xmin = -15.0;
    double xmax = 15.0;
    std::size_t nx = 601;

    static Grid1D from_points(double xmin, double xmax, std::size_t nx) {
        Grid1D g{xmin, xmax, nx};
        g.validate();
        return g;
    }

    /// Grid whose spacing equals dx; the interval length must be a whole
    /// multiple of dx (to 1e-9 relative).
    static Grid1D from_spacing(double xmin, double xmax, double dx) {
        if (!(std::isfinite(xmin) && std::isfinite(xmax) && xmax > xmin))
            throw ValidationError("grid requires xmax > xmin");
        if (!(std::isfinite(dx) && dx > 0.0)) throw ValidationError("grid spacing must be > 0");
        const double cells = (xmax - xmin) / dx;
        const double rounded = std::round(cells);
        if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
            throw ValidationError("domain length is not a multiple of dx");
        return from_points(xmin, xmax, static_cast<std::size_t>(rounded) + 1);
    }

    void validate() const {
        if (!(std::isfinite(xmin) && std::isfinite(xmax) && xmax > xmin))
            throw ValidationError("grid requires xmax > xmin");
        if (nx < 3) throw ValidationError("grid requires at least 3 points");
    }

    double dx() const noexcept { return (xmax - xmin) / static_cast<double>(nx - 1); }
    double x(std::size_t i) const noexcept {
        return i + 1 == nx ? xmax : xmin + static_cast<double>(i) * dx();
    }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;
};

/// Nodal values of one scalar quantity on a grid.
struct Field {
    Grid1D grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid1D& g, double fill = 0.0) : grid(g), values(g.nx, fill) {}
    Field(const Grid1D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.nx) throw ValidationError("field length does not match grid");
    }

    template <class F>
    static Field sample(const Grid1D& g, F&& f) {
        Field out(g);
        for (std::size_t i = 0; i < g.nx; ++i) out.values[i] = f(g.x(i));
        return out;
    }

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct TimedField {
    double time = 0.0;
    Field field;
};

/// Composite trapezoidal (int f^2 dx)^{1/2}.
inline double l2_space_squared(const Field& f) {
    const std::size_t n = f.size();
    if (n == 0) return 0.0;
    double sum = 0.5 * (f[0] * f[0] + f[n - 1] * f[n - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) sum += f[i] * f[i];
    return sum * f.grid.dx();
}

inline double l2_space(const Field& f) { return std::sqrt(l2_space_squared(f)); }

/// Trapezoidal integral of f over the grid.
inline double integrate(const Field& f) {
    const std::size_t n = f.size();
    double sum = 0.5 * (f[0] + f[n - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) sum += f[i];
    return sum * f.grid.dx();
}

/// Streaming left-rectangle rule in time of the squared space norm over
/// [0, horizon]. Snapshots must start at t = 0 and arrive in increasing time
/// order; snapshots past the horizon contribute nothing.
class SpaceTimeL2 {
public:
    explicit SpaceTimeL2(double horizon) : horizon_(horizon) {
        if (!(horizon > 0.0)) throw ValidationError("space-time norm horizon must be > 0");
    }

    void add(double time, const Field& f) {
        if (count_ == 0) {
            if (std::abs(time) > 1e-12) throw ValidationError("space-time norm series must start at t = 0");
        } else if (!(time > last_time_)) {
            throw ValidationError("space-time norm series must be strictly increasing in time");
        }
        if (count_ > 0 && last_time_ < horizon_) sum_ += (std::min(time, horizon_) - last_time_) * last_norm2_;
        last_time_ = time;
        last_norm2_ = l2_space_squared(f);
        ++count_;
    }

    double value() const {
        if (count_ < 2) throw ValidationError("space-time norm needs at least two snapshots");
        if (last_time_ < horizon_ - 1e-9) throw ValidationError("series does not cover [0, t_end]");
        return std::sqrt(sum_);
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t count() const noexcept { return count_; }

private:
    double horizon_;
    double sum_ = 0.0;
    double last_time_ = 0.0;
    double last_norm2_ = 0.0;
    std::size_t count_ = 0;
};

inline double l2_spacetime(std::span<const TimedField> series, double t_end) {
    if (series.empty()) throw ValidationError("space-time norm of an empty series");
    SpaceTimeL2 acc(t_end);
    for (const auto& s : series) acc.add(s.time, s.field);
    return acc.value();
}

} // namespace singlimit
