#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vlfsig::svg {

namespace {
constexpr int kWidth = 720, kHeight = 440, kPad = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
}  // namespace

std::string line_chart(const std::vector<std::vector<double>>& columns,
                       const std::vector<std::string>& names, const std::string& title) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    if (columns.size() < 2 || columns[0].empty()) {
        out << "</svg>\n";
        return out.str();
    }
    double xmin = columns[0][0], xmax = columns[0][0];
    for (double v : columns[0]) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
    }
    double ymin = columns[1][0], ymax = columns[1][0];
    for (std::size_t c = 1; c < columns.size(); ++c)
        for (double v : columns[c]) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const auto px = [&](double x) {
        return kPad + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kPad);
    };
    const auto py = [&](double y) {
        return kHeight - kPad - (y - ymin) / (ymax - ymin) * (kHeight - 2 * kPad);
    };
    out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kWidth - 2 * kPad
        << "\" height=\"" << kHeight - 2 * kPad
        << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << kPad << "\" y=\"" << kHeight - 8 << "\" font-size=\"11\">" << xmin
        << "</text>\n";
    out << "<text x=\"" << kWidth - kPad << "\" y=\"" << kHeight - 8
        << "\" text-anchor=\"end\" font-size=\"11\">" << xmax << "</text>\n";
    out << "<text x=\"8\" y=\"" << kHeight - kPad << "\" font-size=\"11\">" << ymin << "</text>\n";
    out << "<text x=\"8\" y=\"" << kPad + 4 << "\" font-size=\"11\">" << ymax << "</text>\n";

    for (std::size_t c = 1; c < columns.size(); ++c) {
        const char* color = kColors[(c - 1) % 10];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        const std::size_t n = std::min(columns[0].size(), columns[c].size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(columns[c][i])) continue;
            out << px(columns[0][i]) << ',' << py(columns[c][i]) << ' ';
        }
        out << "\"/>\n";
        if (c - 1 < names.size()) {
            out << "<text x=\"" << kWidth - kPad - 4 << "\" y=\"" << kPad + 16 * c
                << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
                << names[c - 1] << "</text>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace vlfsig::svg
