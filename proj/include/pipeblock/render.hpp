#pragma once

#include <cctype>
#include <cmath>
#include <ctime>
#include <iomanip>

#include "pipeblock/document.hpp"

namespace pipeblock {

struct RenderOptions {
    bool stamp = false;           // embed a generation timestamp comment
    std::string title;            // defaults to metadata source block
    int ascii_max_width = 200;    // columns before downsampling kicks in
    bool ascii_color = false;     // ANSI colors, resolved by the caller
    std::vector<char> highlight;  // per-pass flag, same order as the document
};

namespace render_detail {

struct Palette {
    const char* light;
    const char* dark;
    const char* text_on_light;
    const char* text_on_dark;
};

inline Palette palette(PassKind k) {
    switch (k) {
        case PassKind::F: return {"#cfe3f7", "#2c5d8f", "#17364f", "#f3f8fd"};
        case PassKind::B: return {"#cdecd2", "#2e7d44", "#1c4427", "#f1faf3"};
        case PassKind::W: return {"#fbe3b5", "#b07818", "#59400d", "#fdf6e7"};
        case PassKind::BW: return {"#d8d2ef", "#5b4ea0", "#2f2753", "#f4f2fb"};
    }
    return {"#eeeeee", "#444444", "#000000", "#ffffff"};
}

// second-half stages (the return leg of a v shape or the mirrored replica)
// flip to dark fill with light text
inline bool second_half(const Topology& topo, int stage) { return stage > topo.devices; }

struct Norm {
    std::string title;
    long long makespan_cells = 0;  // grid only
    double makespan = 0.0;
};

template <typename Dur>
double span_of(const std::vector<ScheduledPassT<Dur>>& passes) {
    double end = 0.0;
    for (const auto& p : passes) end = std::max(end, static_cast<double>(p.start + p.duration));
    return end;
}

inline std::string stamp_comment() {
    std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return std::string("<!-- generated ") + buf + " -->\n";
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

}  // namespace render_detail

// One row per device, time on the x axis, a labeled box per pass. Output is
// deterministic: integer coordinates, fixed ordering, no timestamps unless
// asked for.
inline std::string render_svg(const ScheduleDocument& doc, const RenderOptions& opts = {}) {
    using namespace render_detail;
    const Topology& topo = doc.topology;
    const int rows = topo.devices;
    const int ml = 64, mt = 30, row_h = 24, row_gap = 5, mb = 34;

    double span;
    double px;  // pixels per time unit
    if (doc.is_grid()) {
        span = span_of(doc.grid.passes);
        px = span <= 90 ? 16.0 : std::max(2.0, std::floor(1440.0 / std::max(1.0, span)));
    } else {
        span = span_of(doc.timed.passes);
        px = span <= 0 ? 16.0 : std::min(16.0, 1440.0 / span);
    }
    const int width = ml + static_cast<int>(std::lround(span * px)) + 16;
    const int height = mt + rows * (row_h + row_gap) + mb;

    std::string title = !opts.title.empty()        ? opts.title
                        : doc.metadata.source_block ? *doc.metadata.source_block
                                                    : std::string("schedule");

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"monospace\">\n";
    if (opts.stamp) s << stamp_comment();
    s << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";
    s << "<text x=\"" << ml << "\" y=\"18\" font-size=\"13\" fill=\"#222222\">"
      << xml_escape(title) << "</text>\n";

    for (int dev = 1; dev <= rows; ++dev) {
        int y = mt + (dev - 1) * (row_h + row_gap);
        s << "<text x=\"8\" y=\"" << y + row_h - 8 << "\" font-size=\"11\" fill=\"#444444\">dev "
          << dev << "</text>\n";
        s << "<line x1=\"" << ml << "\" y1=\"" << y + row_h << "\" x2=\"" << width - 8 << "\" y2=\""
          << y + row_h << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    }

    auto draw = [&](int device, int stage, PassKind kind, int microbatch, double start,
                    double duration, bool lit) {
        int x = ml + static_cast<int>(std::lround(start * px));
        int w = std::max(2, static_cast<int>(std::lround(duration * px)) - 1);
        int y = mt + (device - 1) * (row_h + row_gap);
        Palette pal = palette(kind);
        bool dark = second_half(topo, stage);
        s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << row_h
          << "\" fill=\"" << (dark ? pal.dark : pal.light) << "\"";
        if (lit) s << " stroke=\"#d62728\" stroke-width=\"2\"";
        s << "/>\n";
        if (w >= 12) {
            s << "<text x=\"" << x + w / 2 << "\" y=\"" << y + row_h / 2 + 4
              << "\" font-size=\"9\" text-anchor=\"middle\" fill=\""
              << (dark ? pal.text_on_dark : pal.text_on_light) << "\">" << microbatch
              << "</text>\n";
        }
    };
    auto draw_all = [&](const auto& passes) {
        for (size_t i = 0; i < passes.size(); ++i) {
            const auto& p = passes[i];
            bool lit = i < opts.highlight.size() && opts.highlight[i];
            draw(p.device, p.stage, p.kind, p.microbatch, static_cast<double>(p.start),
                 static_cast<double>(p.duration), lit);
        }
    };
    if (doc.is_grid())
        draw_all(doc.grid.passes);
    else
        draw_all(doc.timed.passes);

    // bottom axis with a handful of ticks
    int axis_y = mt + rows * (row_h + row_gap) + 6;
    s << "<line x1=\"" << ml << "\" y1=\"" << axis_y << "\" x2=\""
      << ml + static_cast<int>(std::lround(span * px)) << "\" y2=\"" << axis_y
      << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    double tick = 1.0;
    while (span / tick > 12.0) tick *= 2.0;
    for (double t = 0.0; t <= span + 1e-9; t += tick) {
        int x = ml + static_cast<int>(std::lround(t * px));
        s << "<line x1=\"" << x << "\" y1=\"" << axis_y << "\" x2=\"" << x << "\" y2=\""
          << axis_y + 4 << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
        std::ostringstream lbl;
        lbl << t;
        s << "<text x=\"" << x << "\" y=\"" << axis_y + 16
          << "\" font-size=\"9\" text-anchor=\"middle\" fill=\"#666666\">" << lbl.str()
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

// Text view: one character column per cell, one row per device. Wider
// schedules get downsampled with a note in the legend. Second-half stages
// print lowercase.
inline std::string render_ascii(const ScheduleDocument& doc, const RenderOptions& opts = {}) {
    using namespace render_detail;
    const Topology& topo = doc.topology;
    double span = doc.is_grid() ? span_of(doc.grid.passes) : span_of(doc.timed.passes);
    if (span <= 0) return "(empty schedule)\n";

    int cols = static_cast<int>(std::ceil(span - 1e-9));
    double step = 1.0;
    bool sampled = false;
    if (cols > opts.ascii_max_width) {
        cols = opts.ascii_max_width;
        step = span / cols;
        sampled = true;
    } else if (!doc.is_grid()) {
        step = 1.0;
    }

    std::vector<std::string> grid(topo.devices, std::string(cols, '.'));
    std::vector<std::string> half(topo.devices, std::string(cols, ' '));
    auto put = [&](int device, int stage, PassKind kind, double start, double duration) {
        int c0 = static_cast<int>(std::floor(start / step + 1e-9));
        int c1 = static_cast<int>(std::ceil((start + duration) / step - 1e-9));
        c0 = std::clamp(c0, 0, cols - 1);
        c1 = std::clamp(c1, c0 + 1, cols);
        char ch = pass_letter(kind);
        bool lower = second_half(topo, stage);
        for (int c = c0; c < c1; ++c) {
            grid[device - 1][c] = lower ? static_cast<char>(std::tolower(ch)) : ch;
            half[device - 1][c] = lower ? 'l' : 'u';
        }
    };
    auto put_all = [&](const auto& passes) {
        for (const auto& p : passes)
            put(p.device, p.stage, p.kind, static_cast<double>(p.start),
                static_cast<double>(p.duration));
    };
    if (doc.is_grid())
        put_all(doc.grid.passes);
    else
        put_all(doc.timed.passes);

    auto color_of = [](char c) -> const char* {
        switch (std::toupper(c)) {
            case 'F': return "36";
            case 'B': return "32";
            case 'W': return "33";
            case 'D': return "35";
            default: return nullptr;
        }
    };

    std::ostringstream out;
    for (int dev = 1; dev <= topo.devices; ++dev) {
        out << "dev " << std::setw(2) << dev << " |";
        if (!opts.ascii_color) {
            out << grid[dev - 1];
        } else {
            for (int c = 0; c < cols; ++c) {
                char ch = grid[dev - 1][c];
                const char* col = color_of(ch);
                if (!col) {
                    out << ch;
                    continue;
                }
                bool inv = half[dev - 1][c] == 'l';
                out << "\033[" << (inv ? "7;" : "") << col << 'm' << ch << "\033[0m";
            }
        }
        out << "|\n";
    }
    out << "legend: F forward, B input grad, W weight grad, D fused backward, . idle;"
        << " lowercase marks second-half stages\n";
    if (sampled) {
        std::ostringstream ratio;
        ratio << std::setprecision(3) << step;
        out << "note: schedule wider than " << opts.ascii_max_width
            << " columns, each column covers about " << ratio.str() << " cells\n";
    }
    return out.str();
}

}  // namespace pipeblock
