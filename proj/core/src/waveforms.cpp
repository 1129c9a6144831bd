#include "cellsim/waveforms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cellsim {

PiecewiseWaveform::PiecewiseWaveform(std::vector<Breakpoint> points) {
    points_.reserve(points.size());
    for (const auto& p : points) append(p.t, p.value);
}

void PiecewiseWaveform::append(double t, double value) {
    if (!points_.empty()) {
        const auto& last = points_.back();
        if (t == last.t && value == last.value) return;
        if (!(t > last.t)) {
            throw std::invalid_argument("waveform breakpoint times must be strictly increasing");
        }
    }
    points_.push_back({t, value});
}

double PiecewiseWaveform::value_at(double t) const {
    if (points_.empty()) throw std::out_of_range("empty waveform");
    if (t <= points_.front().t) return points_.front().value;
    if (t >= points_.back().t) return points_.back().value;
    const auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                     [](double v, const Breakpoint& p) { return v < p.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double s = (t - a.t) / (b.t - a.t);
    return a.value + s * (b.value - a.value);
}

PiecewiseWaveform reconstruct_inductor(const Trace& trace, std::size_t cell) {
    PiecewiseWaveform w;
    const double T = trace.period;
    for (const auto& rec : trace.periods) {
        const auto& c = rec.cells.at(cell);
        const double t0 = static_cast<double>(rec.index) * T;
        const double t_end = static_cast<double>(rec.index + 1) * T;
        w.append(t0, c.i_start);
        w.append(t0 + c.duty * T, c.i_switch);
        if (c.mode.is_dcm() && c.mode.passive_duty > 0.0) {
            w.append(t0 + (c.duty + c.mode.passive_duty) * T, 0.0);
        }
        w.append(t_end, c.i_end);
    }
    return w;
}

namespace {

// Current leaving a node through a cell terminal, as a combination of the
// instantaneous switch and passive-device currents.
struct TerminalRole {
    std::size_t cell = 0;
    double switch_weight = 0.0;
    double diode_weight = 0.0;
};

enum class Interval { on, passive, idle };

Interval interval_at(const CellStepSolution& c, double tau, double T) {
    if (tau < c.duty * T) return Interval::on;
    if (tau < (c.duty + c.mode.passive_duty) * T) return Interval::passive;
    return Interval::idle;
}

double current_in(const CellStepSolution& c, Interval iv, double tau, double T) {
    switch (iv) {
        case Interval::on:
            return c.i_start + (c.i_switch - c.i_start) * tau / (c.duty * T);
        case Interval::passive: {
            const double len = c.mode.passive_duty * T;
            return c.i_switch + (c.i_end - c.i_switch) * (tau - c.duty * T) / len;
        }
        case Interval::idle:
            break;
    }
    return 0.0;
}

struct LocalPoint {
    double tau = 0.0;
    double value = 0.0;
};

}  // namespace

PiecewiseWaveform reconstruct_capacitor(const Circuit& circuit, const Trace& trace, std::size_t capacitor) {
    const auto& cap = circuit.capacitors.at(capacitor);
    const bool use_pos = cap.pos != kGroundNode;
    const std::string& node = use_pos ? cap.pos : cap.neg;
    const double sign = use_pos ? 1.0 : -1.0;

    for (std::size_t i = 0; i < circuit.capacitors.size(); ++i) {
        const auto& other = circuit.capacitors[i];
        if (i != capacitor && (other.pos == node || other.neg == node)) {
            throw std::invalid_argument("capacitor current of " + cap.name + " is under-determined: node " + node +
                                        " has another capacitor (" + other.name + ")");
        }
    }
    for (const auto& v : circuit.vsources) {
        if (v.pos == node || v.neg == node) {
            throw std::invalid_argument("capacitor current of " + cap.name + " is under-determined: node " + node +
                                        " has voltage source " + v.name);
        }
    }

    std::vector<TerminalRole> roles;
    for (std::size_t i = 0; i < circuit.cells.size(); ++i) {
        const auto& x = circuit.cells[i];
        const double inv_n = x.kind == CellKind::flyback ? 1.0 / x.turns_ratio : 1.0;
        if (x.terminal_a == node) roles.push_back({i, 1.0, 0.0});
        if (x.terminal_p == node) {
            roles.push_back({i, 0.0, x.kind == CellKind::basic ? 1.0 : -inv_n});
        }
        if (x.terminal_c == node) {
            roles.push_back({i, -1.0, x.kind == CellKind::basic ? -1.0 : inv_n});
        }
    }

    const double T = trace.period;
    const double C = cap.farads;
    const std::size_t vc_slot = trace.layout->capacitor_voltage(capacitor);

    // Per period: local breakpoints with the exact (zero-mean ripple) values.
    std::vector<std::vector<LocalPoint>> periods;
    periods.reserve(trace.periods.size());
    for (const auto& rec : trace.periods) {
        const auto voltage = [&](const std::string& n) {
            const std::size_t idx = circuit.node_index(n);
            return idx == kGround ? 0.0 : rec.x[idx];
        };
        double steady_leaving = 0.0;
        for (const auto& r : circuit.resistors) {
            if (r.n1 == node) steady_leaving += (voltage(r.n1) - voltage(r.n2)) / r.ohms;
            if (r.n2 == node) steady_leaving += (voltage(r.n2) - voltage(r.n1)) / r.ohms;
        }
        for (const auto& s : circuit.isources) {
            if (s.pos == node) steady_leaving += s.amps;
            if (s.neg == node) steady_leaving -= s.amps;
        }

        std::vector<double> taus{0.0, T};
        for (const auto& role : roles) {
            const auto& c = rec.cells[role.cell];
            taus.push_back(c.duty * T);
            if (c.mode.is_dcm()) taus.push_back((c.duty + c.mode.passive_duty) * T);
        }
        std::sort(taus.begin(), taus.end());
        taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
        while (!taus.empty() && taus.back() > T) taus.pop_back();

        // Capacitor current at `tau`, with each cell's interval taken at `mid`
        // so segment ends get one-sided limits.
        const auto cap_current = [&](double tau, double mid) {
            double leaving = steady_leaving;
            for (const auto& role : roles) {
                const auto& c = rec.cells[role.cell];
                const Interval iv = interval_at(c, mid, T);
                const double il = current_in(c, iv, tau, T);
                if (iv == Interval::on) leaving += role.switch_weight * il;
                else if (iv == Interval::passive) leaving += role.diode_weight * il;
            }
            return -sign * leaving;
        };

        // Segment end values (one-sided limits), then the segment-wise mean.
        const std::size_t nseg = taus.size() - 1;
        std::vector<double> left(nseg), right(nseg);
        double charge = 0.0;
        for (std::size_t j = 0; j < nseg; ++j) {
            const double mid = 0.5 * (taus[j] + taus[j + 1]);
            left[j] = cap_current(taus[j], mid);
            right[j] = cap_current(taus[j + 1], mid);
            charge += 0.5 * (taus[j + 1] - taus[j]) * (left[j] + right[j]);
        }
        const double mean_current = charge / T;

        std::vector<LocalPoint> pts;
        pts.push_back({0.0, 0.0});
        double r = 0.0;
        double area = 0.0;  // integral of the ripple over the period
        for (std::size_t j = 0; j < nseg; ++j) {
            const double h = taus[j + 1] - taus[j];
            const double a = left[j] - mean_current;
            const double b = right[j] - mean_current;
            if (a * b < 0.0) {
                const double s = h * a / (a - b);
                pts.push_back({taus[j] + s, r + (a * s + (b - a) * s * s / (2.0 * h)) / C});
            }
            area += h * r + h * h * (2.0 * a + b) / (6.0 * C);
            r += 0.5 * h * (a + b) / C;
            pts.push_back({taus[j + 1], r});
        }
        const double offset = rec.x[vc_slot] - area / T;
        for (auto& p : pts) p.value += offset;
        periods.push_back(std::move(pts));
    }

    PiecewiseWaveform w;
    const std::size_t count = periods.size();
    for (std::size_t n = 0; n < count; ++n) {
        auto& pts = periods[n];
        const double t0 = static_cast<double>(n) * T;
        const double target = trace.periods[n].x[vc_slot];
        const double first = n == 0 ? pts.front().value : 0.5 * (periods[n - 1].back().value + pts.front().value);
        const double last = n + 1 == count ? pts.back().value : 0.5 * (pts.back().value + periods[n + 1].front().value);

        // Container mean with the boundary values pinned, then the interior shift.
        double integral = 0.0;
        double interior_weight = 0.0;
        for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
            const double a = j == 0 ? first : pts[j].value;
            const double b = j + 2 == pts.size() ? last : pts[j + 1].value;
            const double h = pts[j + 1].tau - pts[j].tau;
            integral += 0.5 * h * (a + b);
            if (j != 0) interior_weight += 0.5 * h;
            if (j + 2 != pts.size()) interior_weight += 0.5 * h;
        }
        const double shift = interior_weight > 0.0 ? (target * T - integral) / interior_weight : 0.0;

        w.append(t0, first);
        for (std::size_t j = 1; j + 1 < pts.size(); ++j) {
            if (pts[j].tau <= pts[j - 1].tau) continue;
            w.append(t0 + pts[j].tau, pts[j].value + shift);
        }
        if (n + 1 == count) w.append(static_cast<double>(n + 1) * T, last);
    }
    return w;
}

namespace {

void check_window(const PiecewiseWaveform& w, TimeWindow window) {
    if (w.size() < 2) throw std::invalid_argument("waveform needs at least two breakpoints");
    if (!(window.end > window.start)) throw std::invalid_argument("empty time window");
    const double slack = 1e-12 * std::max(std::abs(w.end()), 1.0);
    if (window.start < w.start() - slack || window.end > w.end() + slack) {
        throw std::invalid_argument("time window exceeds waveform span");
    }
}

// Breakpoints clipped to the window, with interpolated end points.
std::vector<Breakpoint> clip(const PiecewiseWaveform& w, TimeWindow window) {
    std::vector<Breakpoint> out;
    out.push_back({window.start, w.value_at(window.start)});
    for (const auto& p : w.points()) {
        if (p.t > window.start && p.t < window.end) out.push_back(p);
    }
    out.push_back({window.end, w.value_at(window.end)});
    return out;
}

}  // namespace

WaveformStats stats(const PiecewiseWaveform& w, TimeWindow window) {
    check_window(w, window);
    const auto pts = clip(w, window);
    WaveformStats s;
    s.minimum = s.maximum = pts.front().value;
    double integral = 0.0;
    double square = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double a = pts[i].value;
        const double b = pts[i + 1].value;
        const double h = pts[i + 1].t - pts[i].t;
        integral += 0.5 * h * (a + b);
        square += h * (a * a + a * b + b * b) / 3.0;
        s.minimum = std::min(s.minimum, b);
        s.maximum = std::max(s.maximum, b);
    }
    const double span = window.end - window.start;
    s.average = integral / span;
    s.rms = std::sqrt(std::max(square / span, 0.0));
    // Roundoff can push the mean a hair outside [min, max] for flat signals.
    s.average = std::clamp(s.average, s.minimum, s.maximum);
    s.rms = std::max(s.rms, std::abs(s.average));
    return s;
}

std::vector<Harmonic> spectrum(const PiecewiseWaveform& w, TimeWindow window, double fundamental,
                               int n_harmonics) {
    check_window(w, window);
    if (!(fundamental > 0.0)) throw std::invalid_argument("fundamental frequency must be positive");
    if (n_harmonics < 0) throw std::invalid_argument("harmonic count must be non-negative");
    const double span = window.end - window.start;
    const double cycles = span * fundamental;
    if (cycles < 0.5 || std::abs(cycles - std::round(cycles)) > 1e-6 * std::max(1.0, cycles)) {
        throw std::invalid_argument("window does not span an integer number of fundamental periods");
    }

    const auto pts = clip(w, window);
    std::vector<Harmonic> out;
    out.push_back({0, stats(w, window).average, 0.0});
    using cplx = std::complex<double>;
    const cplx j(0.0, 1.0);
    for (int k = 1; k <= n_harmonics; ++k) {
        const double omega = 2.0 * std::numbers::pi * fundamental * k;
        cplx acc(0.0, 0.0);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double h = pts[i + 1].t - pts[i].t;
            if (!(h > 0.0)) continue;
            const double slope = (pts[i + 1].value - pts[i].value) / h;
            // Antiderivative of x(t) e^{-jwt}: e^{-jwt} (j x(t)/w + slope/w^2).
            const auto F = [&](double t, double x) {
                return std::exp(-j * (omega * (t - window.start))) * (j * x / omega + slope / (omega * omega));
            };
            acc += F(pts[i + 1].t, pts[i + 1].value) - F(pts[i].t, pts[i].value);
        }
        const cplx c = acc * (2.0 / span);
        out.push_back({k, std::abs(c), std::arg(c)});
    }
    return out;
}

TimeWindow tail_window(const PiecewiseWaveform& w, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("window fraction must lie in (0, 1]");
    const double span = w.end() - w.start();
    return {w.end() - fraction * span, w.end()};
}

}  // namespace cellsim
