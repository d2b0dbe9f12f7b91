#include "kinlim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace kinlim {

namespace {

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

struct Axis {
    double lo, hi;
    bool log;
    double map(double v) const {
        const double a = log ? std::log10(v) : v;
        return (a - lo) / (hi - lo);
    }
};

Axis make_axis(const Figure& fig, bool x_axis) {
    const bool log = x_axis ? fig.logx : fig.logy;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : fig.series)
        for (double v : x_axis ? s.x : s.y) {
            if (!std::isfinite(v) || (log && v <= 0.0)) continue;
            const double a = log ? std::log10(v) : v;
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi <= lo) hi = lo + 1.0;
    const double pad = 0.03 * (hi - lo);
    return {lo - pad, hi + pad, log};
}

}  // namespace

std::string render_svg(const Figure& fig) {
    const double W = 720, H = 480, ml = 80, mr = 180, mt = 40, mb = 60;
    const double pw = W - ml - mr, ph = H - mt - mb;
    const Axis ax = make_axis(fig, true), ay = make_axis(fig, false);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(fig.title)
       << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = i / 5.0;
        const double vx = ax.lo + fx * (ax.hi - ax.lo), vy = ay.lo + fx * (ay.hi - ay.lo);
        const double px = ml + fx * pw, py = mt + ph - fx * ph;
        os << "<line x1=\"" << px << "\" y1=\"" << mt + ph << "\" x2=\"" << px << "\" y2=\"" << mt + ph + 5
           << "\" stroke=\"black\"/>";
        os << "<text x=\"" << px << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">"
           << num(ax.log ? std::pow(10.0, vx) : vx) << "</text>\n";
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << py << "\" x2=\"" << ml << "\" y2=\"" << py
           << "\" stroke=\"black\"/>";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
           << num(ay.log ? std::pow(10.0, vy) : vy) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(fig.xlabel)
       << "</text>\n";
    os << "<text transform=\"translate(18," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(fig.ylabel) << "</text>\n";
    for (std::size_t k = 0; k < fig.series.size(); ++k) {
        const auto& s = fig.series[k];
        const char* color = kColors[k % std::size(kColors)];
        std::ostringstream pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if ((ax.log && s.x[i] <= 0) || (ay.log && s.y[i] <= 0)) continue;
            const double px = ml + ax.map(s.x[i]) * pw, py = mt + ph - ay.map(s.y[i]) * ph;
            if (s.points)
                os << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
            else
                pts << num(px) << "," << num(py) << " ";
        }
        if (!s.points)
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
               << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(k);
        os << "<rect x=\"" << ml + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"4\" fill=\"" << color
           << "\"/><text x=\"" << ml + pw + 30 << "\" y=\"" << ly - 3 << "\">" << escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_gnuplot(const Figure& fig) {
    std::ostringstream os;
    os << "set title \"" << fig.title << "\"\n";
    os << "set xlabel \"" << fig.xlabel << "\"\nset ylabel \"" << fig.ylabel << "\"\n";
    if (fig.logx) os << "set logscale x\n";
    if (fig.logy) os << "set logscale y\n";
    for (std::size_t k = 0; k < fig.series.size(); ++k) {
        os << "$d" << k << " << EOD\n";
        const auto& s = fig.series[k];
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", s.x[i], s.y[i]);
            os << buf;
        }
        os << "EOD\n";
    }
    os << "plot ";
    for (std::size_t k = 0; k < fig.series.size(); ++k) {
        if (k) os << ", \\\n     ";
        os << "$d" << k << " with " << (fig.series[k].points ? "points pt 7 ps 0.5" : "lines") << " title \""
           << fig.series[k].label << "\"";
    }
    os << "\n";
    return os.str();
}

}  // namespace kinlim
