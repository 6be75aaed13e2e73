#pragma once

// On-disk formats: snapshot CSV, manifest, sweep report and SVG line plots.
// Every file is written whole to a sibling temporary and renamed into place.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "singlimit/errors.hpp"
#include "singlimit/experiments.hpp"
#include "singlimit/grid.hpp"

namespace singlimit::io {

namespace fs = std::filesystem;

/// %.17g, the round-trip representation used for every CSV value.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_atomic(const fs::path& path, std::string_view contents) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory for " + path.string() + ": " + ec.message());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return ss.str();
}

inline std::string snapshot_csv(const Field& f) {
    std::string s = "x,value\n";
    s.reserve(f.size() * 48);
    for (std::size_t i = 0; i < f.size(); ++i) {
        s += format_double(f.grid.x(i));
        s += ',';
        s += format_double(f[i]);
        s += '\n';
    }
    return s;
}

inline void write_snapshot(const Field& f, const fs::path& path) { write_atomic(path, snapshot_csv(f)); }

/// Reads a snapshot back; the grid is reconstructed from the first and
/// last abscissae and the row count.
inline Field read_snapshot(const fs::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "x,value")
        throw IoError(path.string() + ": missing header x,value");
    std::vector<double> xs, vs;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        char* end = nullptr;
        const double x = comma == std::string::npos ? NAN : std::strtod(line.c_str(), &end);
        const double v = comma == std::string::npos ? NAN : std::strtod(line.c_str() + comma + 1, &end);
        if (comma == std::string::npos || end != line.c_str() + line.size())
            throw IoError(path.string() + ": malformed row " + std::to_string(row));
        xs.push_back(x);
        vs.push_back(v);
    }
    if (xs.size() < 3) throw IoError(path.string() + ": too few rows");
    const Grid1D g{xs.front(), xs.back(), xs.size()};
    return Field(g, std::move(vs));
}

inline std::string snapshot_name(std::string_view prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%05zu.csv", index);
    return std::string(prefix) + buf;
}

/// Writes one CSV per snapshot plus manifest.csv (`time,filename`).
inline void write_series(std::span<const TimedField> series, const fs::path& dir,
                         std::string_view prefix) {
    std::string manifest = "time,filename\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto name = snapshot_name(prefix, k);
        write_snapshot(series[k].field, dir / name);
        manifest += format_double(series[k].time) + "," + name + "\n";
    }
    write_atomic(dir / "manifest.csv", manifest);
}

struct ManifestEntry {
    double time;
    std::string filename;
};

inline std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "time,filename")
        throw IoError(path.string() + ": missing header time,filename");
    std::vector<ManifestEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError(path.string() + ": malformed row");
        out.push_back({std::strtod(line.c_str(), nullptr), line.substr(comma + 1)});
    }
    return out;
}

inline std::vector<TimedField> read_series(const fs::path& dir) {
    std::vector<TimedField> out;
    for (const auto& e : read_manifest(dir / "manifest.csv"))
        out.push_back({e.time, read_snapshot(dir / e.filename)});
    return out;
}

inline std::string report_csv(const ConvergenceReport& r) {
    std::string s = "epsilon,err_p,err_m,speed,limit_speed\n";
    for (std::size_t k = 0; k < r.epsilons.size(); ++k) {
        s += format_double(r.epsilons[k]) + "," + format_double(r.err_p[k]) + "," +
             format_double(r.err_m[k]) + "," + format_double(r.speeds[k]) + "," +
             format_double(r.limit_speed) + "\n";
    }
    return s;
}

inline void write_report(const ConvergenceReport& r, const fs::path& path) {
    write_atomic(path, report_csv(r));
}

struct PlotSeries {
    std::vector<TimedField> curves;
    std::string color;
    bool dashed = false;
    std::string label;
};

/// Line plot of p(x) snapshots on [xmin, xmax] x [0, 1]; each curve is a
/// polyline, the time of every curve is written next to its right end.
inline std::string svg_plot(const std::vector<PlotSeries>& groups, std::string_view title) {
    const double W = 640, H = 400, L = 50, R = 20, T = 30, B = 40;
    double xmin = 0, xmax = 1;
    bool first = true;
    for (const auto& g : groups)
        for (const auto& c : g.curves) {
            if (first) xmin = c.field.grid.xmin, xmax = c.field.grid.xmax, first = false;
            xmin = std::min(xmin, c.field.grid.xmin);
            xmax = std::max(xmax, c.field.grid.xmax);
        }
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - std::clamp(y, 0.0, 1.0) * (H - T - B); };
    char buf[128];
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
    os << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\""
       << W - L - R << "\" height=\"" << H - T - B << "\"/></g>\n";
    for (int k = 0; k <= 4; ++k) {
        const double y = 0.25 * k;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%g</text>\n",
                      L - 4, py(y) + 4, y);
        os << buf;
        const double x = xmin + 0.25 * k * (xmax - xmin);
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n",
                      px(x), H - B + 14, x);
        os << buf;
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 6 << "\" text-anchor=\"middle\">x</text>\n";
    double legend_y = T + 14;
    for (const auto& g : groups) {
        for (const auto& c : g.curves) {
            os << "<polyline fill=\"none\" stroke=\"" << g.color << "\" stroke-width=\"1.2\"";
            if (g.dashed) os << " stroke-dasharray=\"5,3\"";
            os << " points=\"";
            for (std::size_t i = 0; i < c.field.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(c.field.grid.x(i)), py(c.field[i]));
                os << buf;
            }
            os << "\"/>\n";
            const auto front = front_position(c.field, 0.5);
            if (front && !g.dashed) {
                std::snprintf(buf, sizeof buf,
                              "<text x=\"%.2f\" y=\"%.2f\" fill=\"%s\">t=%g</text>\n",
                              px(*front) + 3, py(0.5) - 4, g.color.c_str(), c.time);
                os << buf;
            }
        }
        if (!g.label.empty()) {
            os << "<text x=\"" << L + 8 << "\" y=\"" << legend_y << "\" fill=\"" << g.color << "\">"
               << g.label << "</text>\n";
            legend_y += 14;
        }
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::vector<PlotSeries>& groups, std::string_view title,
                      const fs::path& path) {
    write_atomic(path, svg_plot(groups, title));
}

} // namespace singlimit::io
