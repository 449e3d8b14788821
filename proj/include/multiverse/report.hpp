#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "multiverse/errors.hpp"
#include "multiverse/io.hpp"
#include "multiverse/matrix.hpp"

namespace multiverse {

/// Target-domain spectra of one method, for side-by-side decay plots.
struct SpectrumReport {
    std::string name;
    Vector gram_values;    // descending
    Vector fisher_values;  // descending
    std::size_t effective_rank = 0;
    double fisher_l1 = 0.0;
};

enum class SpectrumPanel { Gram, Fisher };

namespace detail {

inline const Vector& panel_values(const SpectrumReport& report, SpectrumPanel panel) {
    return panel == SpectrumPanel::Gram ? report.gram_values : report.fisher_values;
}

}  // namespace detail

/// The bit-exact artifact backing a spectrum figure: one row per index, one
/// column per method.
inline std::string spectrum_csv(const std::vector<SpectrumReport>& reports,
                                SpectrumPanel panel) {
    if (reports.empty()) throw ConfigError("spectrum_csv: no reports");
    std::size_t depth = 0;
    for (const auto& r : reports) {
        if (detail::panel_values(r, panel).empty())
            throw ConfigError("spectrum_csv: report '" + r.name + "' has no eigenvalues");
        depth = std::max(depth, detail::panel_values(r, panel).size());
    }
    std::ostringstream out;
    out << "k";
    for (const auto& r : reports) out << ',' << r.name;
    out << '\n';
    for (std::size_t k = 0; k < depth; ++k) {
        out << k;
        for (const auto& r : reports) {
            const Vector& values = detail::panel_values(r, panel);
            out << ',';
            if (k < values.size()) out << format_real(values[k]);
        }
        out << '\n';
    }
    return out.str();
}

/// Log-scale decay plot, one polyline per method. Values at or below zero
/// are clamped to a floor twelve decades under the panel maximum; the CSV
/// next to it carries the exact numbers.
inline std::string spectrum_svg(const std::vector<SpectrumReport>& reports,
                                SpectrumPanel panel) {
    if (reports.empty()) throw ConfigError("spectrum_svg: no reports");
    const char* title = panel == SpectrumPanel::Gram ? "Gram spectrum" : "Fisher spectrum";

    double top = 0.0;
    std::size_t depth = 0;
    for (const auto& r : reports) {
        const Vector& values = detail::panel_values(r, panel);
        if (values.empty())
            throw ConfigError("spectrum_svg: report '" + r.name + "' has no eigenvalues");
        depth = std::max(depth, values.size());
        for (double v : values) top = std::max(top, v);
    }
    if (top <= 0.0) top = 1.0;
    const double floor = top * 1e-12;
    const double log_top = std::log10(top);
    const double log_floor = std::log10(floor);

    const double width = 640.0, height = 480.0;
    const double left = 70.0, right = 24.0, above = 40.0, below = 48.0;
    const double plot_w = width - left - right;
    const double plot_h = height - above - below;
    auto x_of = [&](std::size_t k) {
        return left + (depth <= 1 ? 0.0 : plot_w * static_cast<double>(k) /
                                              static_cast<double>(depth - 1));
    };
    auto y_of = [&](double v) {
        const double lv = std::log10(std::max(v, floor));
        return above + plot_h * (log_top - lv) / (log_top - log_floor);
    };

    static const char* kColors[] = {"#2c7fb8", "#d95f02", "#1b9e77", "#7570b3",
                                    "#e7298a", "#66a61e"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    // axes
    svg << "<line x1=\"" << left << "\" y1=\"" << above << "\" x2=\"" << left << "\" y2=\""
        << above + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << above + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << above + plot_h << "\" stroke=\"black\"/>\n";
    for (int decade = 0; decade <= 12; decade += 3) {
        const double v = top * std::pow(10.0, -decade);
        svg << "<text x=\"" << left - 6 << "\" y=\"" << y_of(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e"
            << static_cast<int>(std::round(std::log10(v))) << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << "eigenvalue index (sorted descending)</text>\n";

    for (std::size_t r = 0; r < reports.size(); ++r) {
        const Vector& values = detail::panel_values(reports[r], panel);
        const char* color = kColors[r % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < values.size(); ++k)
            svg << x_of(k) << ',' << y_of(values[k]) << ' ';
        svg << "\"/>\n";
        const double ly = above + 16.0 + 16.0 * static_cast<double>(r);
        svg << "<line x1=\"" << left + plot_w - 120 << "\" y1=\"" << ly << "\" x2=\""
            << left + plot_w - 96 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + plot_w - 90 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << reports[r].name
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void emit_spectrum_files(const std::vector<SpectrumReport>& reports, SpectrumPanel panel,
                                const std::filesystem::path& csv_path,
                                const std::filesystem::path& svg_path) {
    write_text_atomic(csv_path, spectrum_csv(reports, panel));
    write_text_atomic(svg_path, spectrum_svg(reports, panel));
}

}  // namespace multiverse
