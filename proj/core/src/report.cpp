#include "cellsim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace cellsim {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

const char* mode_name(const ConductionMode& m) { return m.is_dcm() ? "DCM" : "CCM"; }

void write_cell_header(std::ostream& os, const Circuit& circuit) {
    os << "source,period,t_start,mode,d,d_p";
    for (std::size_t i = 1; i < circuit.cells.size(); ++i) {
        const auto& n = circuit.cells[i].name;
        os << ",mode(" << n << "),d(" << n << "),d_p(" << n << ")";
    }
}

}  // namespace

void write_period_csv(std::ostream& os, const Circuit& circuit, const Trace& trace) {
    write_cell_header(os, circuit);
    for (const auto& label : trace.layout->labels()) os << ',' << label;
    os << '\n';
    for (const auto& rec : trace.periods) {
        os << "avg," << rec.index << ',' << format_number(rec.t_start);
        if (rec.cells.empty()) os << ",,,";
        for (const auto& c : rec.cells) {
            os << ',' << mode_name(c.mode) << ',' << format_number(c.duty) << ','
               << format_number(c.mode.passive_duty);
        }
        for (const double v : rec.x) os << ',' << format_number(v);
        os << '\n';
    }
}

void write_period_csv(std::ostream& os, const Circuit& circuit, const SwitchedTrace& trace) {
    write_cell_header(os, circuit);
    for (const auto& s : trace.signals) os << ',' << s;
    os << '\n';
    for (const auto& rec : trace.periods) {
        os << "oracle," << rec.index << ',' << format_number(rec.t_start);
        if (circuit.cells.empty()) os << ",,,";
        for (std::size_t k = 0; k < circuit.cells.size(); ++k) {
            const double d = circuit.cells[k].duty;
            os << ',' << (rec.diode_opened[k] ? "DCM" : "CCM") << ',' << format_number(d) << ','
               << format_number(std::max(rec.conduction_fraction[k] - d, 0.0));
        }
        for (const double v : rec.mean) os << ',' << format_number(v);
        os << '\n';
    }
}

void write_waveform_csv(std::ostream& os, std::string_view source, std::span<const NamedWaveform> waveforms) {
    os << "source,signal,t,value\n";
    for (const auto& w : waveforms) {
        for (const auto& p : w.waveform.points()) {
            os << source << ',' << w.name << ',' << format_number(p.t) << ',' << format_number(p.value) << '\n';
        }
    }
}

void write_sample_csv(std::ostream& os, const SwitchedTrace& trace) {
    os << "source,signal,t,value\n";
    for (std::size_t s = 0; s < trace.signals.size(); ++s) {
        for (std::size_t k = 0; k < trace.sample_count(); ++k) {
            os << "oracle," << trace.signals[s] << ',' << format_number(trace.sample_t[k]) << ','
               << format_number(trace.sample(k)[s]) << '\n';
        }
    }
}

void write_system_csv(std::ostream& os, const LinearSystem& system, std::span<const double> x) {
    const auto& labels = system.layout->labels();
    os << "row,label";
    for (const auto& l : labels) os << ',' << l;
    os << ",x,z\n";
    for (std::size_t r = 0; r < system.a.rows(); ++r) {
        os << r << ',' << labels[r];
        for (const double v : system.a.row(r)) os << ',' << format_number(v);
        os << ',' << format_number(r < x.size() ? x[r] : 0.0) << ',' << format_number(system.z[r]) << '\n';
    }
}

namespace {

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 260.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 40.0;
constexpr std::size_t kMaxColumns = 1600;

std::string fixed(double v, int digits = 2) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string short_number(double v) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(4) << v;
    return s.str();
}

std::string escape(std::string_view text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

// Keeps first/min/max/last per pixel column so the envelope survives.
std::vector<Breakpoint> decimate(std::span<const Breakpoint> pts) {
    if (pts.size() <= 2 * kMaxColumns) return {pts.begin(), pts.end()};
    const double t0 = pts.front().t;
    const double span = pts.back().t - t0;
    std::vector<Breakpoint> out;
    std::size_t i = 0;
    while (i < pts.size()) {
        const auto col = static_cast<std::size_t>((pts[i].t - t0) / span * static_cast<double>(kMaxColumns));
        std::size_t j = i;
        std::size_t lo = i;
        std::size_t hi = i;
        while (j < pts.size() &&
               static_cast<std::size_t>((pts[j].t - t0) / span * static_cast<double>(kMaxColumns)) == col) {
            if (pts[j].value < pts[lo].value) lo = j;
            if (pts[j].value > pts[hi].value) hi = j;
            ++j;
        }
        std::vector<std::size_t> keep{i, lo, hi, j - 1};
        std::sort(keep.begin(), keep.end());
        keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
        for (const auto k : keep) out.push_back(pts[k]);
        i = j;
    }
    return out;
}

}  // namespace

void write_svg(std::ostream& os, std::span<const NamedWaveform> panels, std::string_view title) {
    const double height = kTop + static_cast<double>(panels.size()) * (kPanelHeight + kBottom);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0) << "\" height=\""
       << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fixed(kWidth / 2, 0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << escape(title) << "</text>\n";

    const double plot_w = kWidth - kLeft - kRight;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& w = panels[p].waveform;
        const double top = kTop + static_cast<double>(p) * (kPanelHeight + kBottom);
        const double bottom = top + kPanelHeight - 20.0;
        const double plot_h = bottom - top - 10.0;
        os << "<g>\n";
        os << "<text x=\"" << fixed(kLeft, 0) << "\" y=\"" << fixed(top + 4, 0) << "\">" << escape(panels[p].name)
           << "</text>\n";
        if (w.size() < 2) {
            os << "</g>\n";
            continue;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& pt : w.points()) {
            lo = std::min(lo, pt.value);
            hi = std::max(hi, pt.value);
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
        const double t0 = w.start();
        const double t1 = w.end();
        const auto px = [&](double t) { return kLeft + (t - t0) / (t1 - t0) * plot_w; };
        const auto py = [&](double v) { return bottom - (v - lo) / (hi - lo) * plot_h; };

        os << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(bottom) << "\" x2=\"" << fixed(kLeft + plot_w)
           << "\" y2=\"" << fixed(bottom) << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(bottom) << "\" x2=\"" << fixed(kLeft)
           << "\" y2=\"" << fixed(bottom - plot_h) << "\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double v = lo + (hi - lo) * k / 4.0;
            os << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">"
               << short_number(v) << "</text>\n";
            const double t = t0 + (t1 - t0) * k / 4.0;
            os << "<text x=\"" << fixed(px(t)) << "\" y=\"" << fixed(bottom + 16) << "\" text-anchor=\"middle\">"
               << short_number(t * 1e3) << " ms</text>\n";
        }
        os << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1\" points=\"";
        bool first = true;
        for (const auto& pt : decimate(w.points())) {
            if (!first) os << ' ';
            os << fixed(px(pt.t)) << ',' << fixed(py(pt.value));
            first = false;
        }
        os << "\"/>\n</g>\n";
    }
    os << "</svg>\n";
}

void write_stats(std::ostream& os, std::span<const NamedWaveform> waveforms, TimeWindow window) {
    const auto col = [&os](const std::string& v) { os << ' ' << std::setw(24) << v; };
    os << std::left << std::setw(14) << "signal" << std::right;
    for (const char* h : {"average", "minimum", "maximum", "rms"}) col(h);
    os << '\n';
    for (const auto& w : waveforms) {
        const auto s = stats(w.waveform, window);
        os << std::left << std::setw(14) << w.name << std::right;
        for (const double v : {s.average, s.minimum, s.maximum, s.rms}) col(format_number(v));
        os << '\n';
    }
}

void write_error_report(std::ostream& os, const ErrorReport& report, double tolerance) {
    os << std::left << std::setw(14) << "signal" << std::right << std::setw(14) << "steady" << std::setw(14)
       << "max_error" << std::setw(10) << "period" << std::setw(14) << "startup" << "  status\n";
    for (const auto& s : report.signals) {
        os << std::left << std::setw(14) << s.name << std::right << std::setw(14) << short_number(s.steady)
           << std::setw(14) << short_number(s.max_error) << std::setw(10) << s.worst_period << std::setw(14)
           << short_number(s.startup_error) << "  " << (s.max_error <= tolerance ? "ok" : "EXCEEDED") << '\n';
    }
    os << "max error " << short_number(report.max_error()) << " (tolerance " << short_number(tolerance)
       << ", first retained period " << report.first_retained << ")\n";
}

std::vector<NamedWaveform> reconstruct_all(const Circuit& circuit, const Trace& trace) {
    std::vector<NamedWaveform> out;
    for (std::size_t k = 0; k < circuit.cells.size(); ++k) {
        out.push_back({"iL(" + circuit.cells[k].name + ")", reconstruct_inductor(trace, k)});
    }
    for (std::size_t i = 0; i < circuit.capacitors.size(); ++i) {
        try {
            out.push_back({"vC(" + circuit.capacitors[i].name + ")", reconstruct_capacitor(circuit, trace, i)});
        } catch (const std::invalid_argument&) {
            // Current not determined at the node; no ripple waveform.
        }
    }
    return out;
}

std::vector<NamedWaveform> sampled_waveforms(const SwitchedTrace& trace) {
    std::vector<NamedWaveform> out;
    const auto add = [&](std::size_t signal) {
        NamedWaveform w{trace.signals[signal], {}};
        for (std::size_t k = 0; k < trace.sample_count(); ++k) {
            const double t = trace.sample_t[k];
            if (!w.waveform.empty() && t <= w.waveform.end()) continue;
            w.waveform.append(t, trace.sample(k)[signal]);
        }
        out.push_back(std::move(w));
    };
    for (std::size_t k = 0; k < trace.cell_count; ++k) add(trace.cell_current_signal(k));
    for (std::size_t i = 0; i < trace.capacitor_count; ++i) add(trace.capacitor_voltage_signal(i));
    return out;
}

}  // namespace cellsim
