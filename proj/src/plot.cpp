#include "spikeloop/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace spikeloop {

namespace {

constexpr double kLeft = 110.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 40.0;

std::string escape(const std::string& s)
{
    std::string out;
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

void header(std::string& svg, double w, double h, const std::string& title)
{
    svg += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                       "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"10\">\n",
                       w, h, w, h);
    svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", w, h);
    if (!title.empty())
        svg += fmt::format("<text x=\"{:.1f}\" y=\"18\" font-size=\"12\">{}</text>\n", kLeft, escape(title));
}

// Time axis with ticks at round seconds fractions.
void time_axis(std::string& svg, double x0, double x1, double y, TimeUs t_end)
{
    svg += fmt::format("<line class=\"axis\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                       x0, y, x1, y);
    const double span_s = std::max<double>(t_end, 1) * 1e-6;
    double step = 1e-3;
    for (double s : {1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
        step = s;
        if (span_s / s <= 10)
            break;
    }
    for (int k = 0; k * step <= span_s + 1e-12; ++k) {
        const double x = x0 + (x1 - x0) * (k * step) / span_s;
        svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                           x, y, x, y + 4);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", x,
                           y + 15, k * step);
    }
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">time (s)</text>\n",
                       (x0 + x1) / 2, y + 30);
}

} // namespace

RasterLayout layout_for(const NetworkSpec& net)
{
    RasterLayout l;
    for (const auto& p : net.populations)
        l.populations.emplace_back(p.name, p.size);
    return l;
}

RasterLayout layout_for(const NetworkSpec& net, const std::vector<std::string>& populations)
{
    RasterLayout l;
    for (const auto& name : populations)
        if (const auto id = net.find_population(name)) {
            const auto& p = net.populations[*id];
            l.populations.emplace_back(p.name, p.size);
        }
    return l;
}

std::string emit_raster_svg(std::span<const RasterRecord> raster, const RasterLayout& layout)
{
    std::vector<std::pair<std::string, int>> lanes;
    if (!layout.populations.empty()) {
        for (const auto& [name, size] : layout.populations)
            for (int i = 0; i < size; ++i)
                lanes.emplace_back(name, i);
    } else {
        for (const auto& r : raster)
            lanes.emplace_back(r.population, r.neuron);
        std::sort(lanes.begin(), lanes.end());
        lanes.erase(std::unique(lanes.begin(), lanes.end()), lanes.end());
    }
    std::map<std::pair<std::string, int>, std::size_t> lane_of;
    for (std::size_t i = 0; i < lanes.size(); ++i)
        lane_of.emplace(lanes[i], i);

    TimeUs t_end = layout.t_end;
    if (t_end == 0)
        for (const auto& r : raster)
            t_end = std::max(t_end, r.time);
    if (t_end == 0)
        t_end = 1000;

    const double lh = layout.lane_height;
    const double plot_h = std::max<double>(lanes.size(), 1) * lh;
    const double w = layout.width;
    const double h = kTop + plot_h + kBottom;
    const double x0 = kLeft;
    const double x1 = w - kRight;
    const double y_axis = kTop + plot_h;

    std::string svg;
    header(svg, w, h, layout.title);
    svg += fmt::format("<line class=\"axis\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                       x0, kTop, x0, y_axis);
    time_axis(svg, x0, x1, y_axis, t_end);

    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const double yc = kTop + (static_cast<double>(i) + 0.5) * lh;
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}[{}]</text>\n",
                           x0 - 4, yc + 3, escape(lanes[i].first), lanes[i].second);
        if (i > 0 && lanes[i].first != lanes[i - 1].first)
            svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ccc\"/>\n",
                               x0, kTop + static_cast<double>(i) * lh, x1, kTop + static_cast<double>(i) * lh);
    }

    svg += "<g stroke=\"#1f4e8c\" stroke-width=\"1\">\n";
    for (const auto& r : raster) {
        const auto it = lane_of.find({r.population, r.neuron});
        if (it == lane_of.end() || r.time > t_end)
            continue;
        const double x = x0 + (x1 - x0) * static_cast<double>(r.time) / static_cast<double>(t_end);
        const double y = kTop + static_cast<double>(it->second) * lh;
        svg += fmt::format("<line class=\"spike\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n",
                           x, y + 2, x, y + lh - 2);
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

std::string emit_trace_svg(std::span<const JointTraceRow> trace, const EncoderConfig& encoder,
                           const std::string& title)
{
    const double w = 900.0;
    const double plot_h = 320.0;
    const double h = kTop + plot_h + kBottom;
    const double x0 = kLeft;
    const double x1 = w - kRight;
    const double y_axis = kTop + plot_h;
    const TimeUs t_end = trace.empty() ? 1000 : std::max<TimeUs>(trace.back().time, 1);
    const double a0 = encoder.angle_min;
    const double a1 = encoder.angle_max;
    auto y_of = [&](double angle) { return y_axis - plot_h * (angle - a0) / (a1 - a0); };

    std::string svg;
    header(svg, w, h, title);
    svg += fmt::format("<line class=\"axis\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                       x0, kTop, x0, y_axis);
    time_axis(svg, x0, x1, y_axis, t_end);

    const double coarse_width = encoder.bin_width() * encoder.num_fine;
    for (int c = 0; c <= encoder.num_coarse; ++c) {
        const double y = y_of(a0 + c * coarse_width);
        svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ccc\"/>\n",
                           x0, y, x1, y);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:g}</text>\n", x0 - 4,
                           y + 3, a0 + c * coarse_width);
    }
    svg += fmt::format("<text x=\"14\" y=\"{:.2f}\" transform=\"rotate(-90 14 {:.2f})\" "
                       "text-anchor=\"middle\">angle (deg)</text>\n",
                       kTop + plot_h / 2, kTop + plot_h / 2);

    if (!trace.empty()) {
        svg += "<polyline class=\"trace\" fill=\"none\" stroke=\"#b03a2e\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const double x = x0 + (x1 - x0) * static_cast<double>(trace[i].time) / t_end;
            svg += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", x, y_of(trace[i].angle));
        }
        svg += "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace spikeloop
