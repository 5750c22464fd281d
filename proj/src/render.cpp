#include "morphogen/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace morphogen {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s(buf);
    if (s == "-0.000") s = "0.000";
    return s;
}

std::string hex_color(double r, double g, double b) {
    auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
    return buf;
}

std::string particle_color(double mass, double sine, double cosine) {
    const double grey = 0.92 - 0.72 * std::clamp(mass, 0.0, 1.0);
    double r = grey, g = grey, b = grey;
    r += (1.0 - r) * 0.8 * sine;
    g *= 1.0 - 0.6 * std::max(sine, cosine);
    b += (1.0 - b) * 0.8 * cosine;
    r *= 1.0 - 0.5 * cosine;
    b *= 1.0 - 0.5 * sine;
    return hex_color(r, g, b);
}

}  // namespace

std::string render_svg(const AttemptRecord& record, const RenderOptions& options) {
    const ParticleField& field = record.field;
    const Workspace& ws = field.workspace.nx > 0 ? field.workspace : record.genome.workspace;

    double x0 = 0.0, x1 = ws.width_cm, y0 = 0.0, y1 = ws.height_cm;
    for (const auto* trace : {&record.com_trace_cm, &record.object_trace_cm}) {
        for (const Vec2& p : *trace) {
            x0 = std::min(x0, p.x());
            x1 = std::max(x1, p.x());
            y0 = std::min(y0, p.y());
            y1 = std::max(y1, p.y());
        }
    }
    x0 -= options.margin_cm;
    y0 -= options.margin_cm;
    x1 += options.margin_cm;
    y1 += options.margin_cm;
    const double width_cm = x1 - x0;
    const double height_cm = y1 - y0;
    // SVG y grows downward; flip so the floor is at the bottom
    auto sx = [&](double x) { return num(x - x0); };
    auto sy = [&](double y) { return num(y1 - y); };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(width_cm * options.pixels_per_cm) + "\" height=\"" + num(height_cm * options.pixels_per_cm) +
           "\" viewBox=\"0 0 " + num(width_cm) + " " + num(height_cm) + "\">\n";
    out += "<title>seed " + std::to_string(record.seed) + " attempt " + std::to_string(record.attempt) +
           " fitness " + num(record.fitness_cm) + " cm</title>\n";

    out += "<g id=\"particles\" stroke=\"none\">\n";
    const double w = ws.spacing_x();
    const double h = ws.spacing_y();
    for (std::size_t idx = 0; idx < field.size(); ++idx) {
        if (!field.alive[idx]) continue;
        const Vec2 p = field.rest_position(idx);
        out += "<rect x=\"" + sx(p.x() - 0.5 * w) + "\" y=\"" + sy(p.y() + 0.5 * h) + "\" width=\"" + num(w) +
               "\" height=\"" + num(h) + "\" fill=\"" +
               particle_color(field.mass[idx], field.amplitude[0][idx], field.amplitude[1][idx]) + "\"/>\n";
    }
    out += "</g>\n";

    if (options.draw_voids) {
        out += "<g id=\"voids\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"0.04\">\n";
        for (const auto& v : record.genome.voids) {
            if (!v.active) continue;
            out += "<circle cx=\"" + sx(v.center.x()) + "\" cy=\"" + sy(v.center.y()) + "\" r=\"" + num(v.radius) +
                   "\"/>\n";
        }
        out += "</g>\n";
    }
    if (options.draw_muscles) {
        out += "<g id=\"muscles\" fill=\"none\" stroke-width=\"0.03\" stroke-dasharray=\"0.15 0.1\">\n";
        for (const auto& m : record.genome.muscles) {
            if (!m.active) continue;
            const char* color = m.channel == Channel::Sine ? "#b22222" : "#2244cc";
            out += "<circle cx=\"" + sx(m.center.x()) + "\" cy=\"" + sy(m.center.y()) + "\" r=\"" + num(m.radius) +
                   "\" stroke=\"" + color + "\"/>\n";
        }
        out += "</g>\n";
    }

    auto polyline = [&](const std::vector<Vec2>& trace, const char* id, const char* color) {
        if (trace.empty()) return;
        out += "<polyline id=\"" + std::string(id) + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"0.08\" points=\"";
        for (std::size_t t = 0; t < trace.size(); ++t) {
            if (t) out += ' ';
            out += sx(trace[t].x()) + "," + sy(trace[t].y());
        }
        out += "\"/>\n";
    };
    polyline(record.com_trace_cm, "com", "#1a9641");
    polyline(record.object_trace_cm, "object", "#e08214");

    out += "</svg>\n";
    return out;
}

}  // namespace morphogen
