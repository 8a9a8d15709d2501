#include "chatty/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "chatty/errors.hpp"

namespace chatty {

namespace {

constexpr Real kWidth = 640.0;
constexpr Real kHeight = 480.0;
constexpr Real kMarginLeft = 62.0;
constexpr Real kMarginRight = 20.0;
constexpr Real kMarginTop = 40.0;
constexpr Real kMarginBottom = 52.0;
constexpr int kTicks = 5;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    Real lo = 0.0;
    Real hi = 1.0;

    void include(Real v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Pads and guards degenerate spans so the projection stays finite.
    void finalize() {
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        const Real pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

struct Frame {
    Range x;
    Range y;

    Real px(Real v) const {
        return kMarginLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kMarginLeft - kMarginRight);
    }
    Real py(Real v) const {
        return kHeight - kMarginBottom -
               (v - y.lo) / (y.hi - y.lo) * (kHeight - kMarginTop - kMarginBottom);
    }
};

void open_document(std::ostringstream& out, const std::string& title) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
        << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& f, const std::string& x_label,
               const std::string& y_label) {
    const Real x0 = kMarginLeft, x1 = kWidth - kMarginRight;
    const Real y0 = kHeight - kMarginBottom, y1 = kMarginTop;
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1)
        << "\" y2=\"" << num(y0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0)
        << "\" y2=\"" << num(y1) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= kTicks; ++i) {
        const Real t = static_cast<Real>(i) / kTicks;
        const Real vx = f.x.lo + t * (f.x.hi - f.x.lo);
        const Real vy = f.y.lo + t * (f.y.hi - f.y.lo);
        const Real tx = f.px(vx);
        const Real ty = f.py(vy);
        out << "<line x1=\"" << num(tx) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(tx)
            << "\" y2=\"" << num(y0 + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(tx) << "\" y=\"" << num(y0 + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(vx) << "</text>\n";
        out << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(ty) << "\" x2=\"" << num(x0)
            << "\" y2=\"" << num(ty) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(ty + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(vy)
            << "</text>\n";
    }
    out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 14)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape_xml(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << num((y0 + y1) / 2) << ")\">" << escape_xml(y_label)
        << "</text>\n";
}

}  // namespace

std::string scatter_svg(const Mat& points, const std::vector<int>& labels,
                        const std::string& title) {
    if (points.rows() != static_cast<Index>(labels.size())) {
        throw ShapeError("scatter_svg: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(points.rows()) + " points");
    }
    if (points.rows() > 0 && points.cols() != 2) {
        throw ShapeError("scatter_svg: points are " + shape_str(points) + ", expected Nx2");
    }

    Frame f;
    if (points.rows() > 0) {
        f.x = {points.col(0).minCoeff(), points.col(0).maxCoeff()};
        f.y = {points.col(1).minCoeff(), points.col(1).maxCoeff()};
    }
    f.x.finalize();
    f.y.finalize();

    std::ostringstream out;
    open_document(out, title);
    draw_axes(out, f, "dim 0", "dim 1");
    for (Index i = 0; i < points.rows(); ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        const char* color = kPalette[static_cast<std::size_t>(label < 0 ? 0 : label) % kPaletteSize];
        out << "<circle cx=\"" << num(f.px(points(i, 0))) << "\" cy=\"" << num(f.py(points(i, 1)))
            << "\" r=\"3\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string curves_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
    Frame f;
    bool any = false;
    for (const Series& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!any) {
                f.x = {x, x};
                f.y = {y, y};
                any = true;
            } else {
                f.x.include(x);
                f.y.include(y);
            }
        }
    }
    f.x.finalize();
    f.y.finalize();

    std::ostringstream out;
    open_document(out, title);
    draw_axes(out, f, x_label, y_label);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        if (s.points.empty()) continue;
        const char* color = kPalette[k % kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) {
            out << num(f.px(x)) << ',' << num(f.py(y)) << ' ';
        }
        out << "\"/>\n";
    }
    // Legend, top-right inside the frame.
    const Real lx = kWidth - kMarginRight - 170.0;
    Real ly = kMarginTop + 12.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % kPaletteSize];
        out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 22)
            << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(series[k].name)
            << "</text>\n";
        ly += 16.0;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace chatty
