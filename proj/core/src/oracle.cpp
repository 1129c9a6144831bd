#include "cellsim/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>

#include "cellsim/linalg.hpp"
#include "cellsim/mna.hpp"

namespace cellsim {

std::size_t SwitchedTrace::signal_index(std::string_view name) const {
    const auto it = std::find(signals.begin(), signals.end(), name);
    if (it == signals.end()) throw std::out_of_range("no switched signal named " + std::string(name));
    return static_cast<std::size_t>(it - signals.begin());
}

namespace {

struct Topology {
    DenseMatrix m;          // state derivative: M x + b
    std::vector<double> b;
    DenseMatrix n;          // network outputs: N x + c
    std::vector<double> c;
};

struct Propagator {
    DenseMatrix p;
    std::vector<double> q;
};

// Resistive network with capacitors as voltage sources (value v_C) and cells
// as current injections. Its matrix does not depend on the topology.
class SwitchedNetwork {
public:
    SwitchedNetwork(const Circuit& circuit) : circuit_(circuit) {
        nn_ = circuit.nodes.size();
        nv_ = circuit.vsources.size();
        nc_ = circuit.capacitors.size();
        ncell_ = circuit.cells.size();
        ny_ = nn_ + nv_ + nc_;
        nx_ = ncell_ + nc_;

        DenseMatrix k(ny_, ny_);
        const auto add = [&](std::size_t r, std::size_t c, double v) {
            if (r != kGround && c != kGround) k(r, c) += v;
        };
        for (const auto& r : circuit.resistors) {
            const std::size_t a = circuit.node_index(r.n1);
            const std::size_t b = circuit.node_index(r.n2);
            const double g = 1.0 / r.ohms;
            add(a, a, g);
            add(b, b, g);
            add(a, b, -g);
            add(b, a, -g);
        }
        const auto stamp_branch = [&](std::size_t br, const std::string& pos, const std::string& neg) {
            const std::size_t p = circuit.node_index(pos);
            const std::size_t q = circuit.node_index(neg);
            add(p, br, 1.0);
            add(q, br, -1.0);
            add(br, p, 1.0);
            add(br, q, -1.0);
        };
        for (std::size_t i = 0; i < nv_; ++i) {
            stamp_branch(nn_ + i, circuit.vsources[i].pos, circuit.vsources[i].neg);
        }
        for (std::size_t i = 0; i < nc_; ++i) {
            stamp_branch(nn_ + nv_ + i, circuit.capacitors[i].pos, circuit.capacitors[i].neg);
        }

        try {
            lu_.emplace_back(std::move(k));
        } catch (const SingularMatrixError& e) {
            throw NumericalError(std::string("singular switched-network system: ") + e.what(), 0);
        }

        std::vector<double> g0(ny_, 0.0);
        for (std::size_t i = 0; i < nv_; ++i) g0[nn_ + i] = circuit.vsources[i].volts;
        for (const auto& s : circuit.isources) {
            const std::size_t p = circuit.node_index(s.pos);
            const std::size_t q = circuit.node_index(s.neg);
            if (p != kGround) g0[p] -= s.amps;
            if (q != kGround) g0[q] += s.amps;
        }
        constant_response_ = lu().solve(g0);

        for (std::size_t i = 0; i < nc_; ++i) {
            std::vector<double> e(ny_, 0.0);
            e[nn_ + nv_ + i] = 1.0;
            cap_response_.push_back(lu().solve(e));
        }
        for (std::size_t k2 = 0; k2 < ncell_; ++k2) {
            on_response_.push_back(lu().solve(injection(k2, CellState::on)));
            off_response_.push_back(lu().solve(injection(k2, CellState::off)));
        }
    }

    std::size_t ny() const { return ny_; }
    std::size_t nx() const { return nx_; }
    std::size_t nodes() const { return nn_; }
    std::size_t vsources() const { return nv_; }
    std::size_t caps() const { return nc_; }
    std::size_t cells() const { return ncell_; }

    Topology build(std::span<const CellState> states) const {
        Topology t{DenseMatrix(nx_, nx_), std::vector<double>(nx_, 0.0), DenseMatrix(ny_, nx_), constant_response_};
        for (std::size_t k = 0; k < ncell_; ++k) {
            if (states[k] == CellState::open) continue;
            const auto& col = states[k] == CellState::on ? on_response_[k] : off_response_[k];
            for (std::size_t r = 0; r < ny_; ++r) t.n(r, k) = col[r];
        }
        for (std::size_t i = 0; i < nc_; ++i) {
            for (std::size_t r = 0; r < ny_; ++r) t.n(r, ncell_ + i) = cap_response_[i][r];
        }

        for (std::size_t k = 0; k < ncell_; ++k) {
            if (states[k] == CellState::open) continue;
            const auto e = terminal_weights(k, states[k]);
            const double inv_l = 1.0 / circuit_.cells[k].inductance;
            for (const auto& [row, w] : e) {
                for (std::size_t j = 0; j < nx_; ++j) t.m(k, j) += w * t.n(row, j) * inv_l;
                t.b[k] += w * t.c[row] * inv_l;
            }
        }
        for (std::size_t i = 0; i < nc_; ++i) {
            const std::size_t row = nn_ + nv_ + i;
            const double inv_c = 1.0 / circuit_.capacitors[i].farads;
            for (std::size_t j = 0; j < nx_; ++j) t.m(ncell_ + i, j) = t.n(row, j) * inv_c;
            t.b[ncell_ + i] = t.c[row] * inv_c;
        }
        return t;
    }

private:
    const LuFactorization& lu() const { return lu_.front(); }

    // Current leaving each terminal node per unit inductor current. The same
    // weights applied to node voltages give the inductor voltage.
    std::vector<std::pair<std::size_t, double>> terminal_weights(std::size_t k, CellState s) const {
        std::vector<std::pair<std::size_t, double>> out;
        const auto& x = circuit_.cells[k];
        const auto term = [&](const std::string& node, double w) {
            const std::size_t i = circuit_.node_index(node);
            if (i != kGround) out.emplace_back(i, w);
        };
        if (s == CellState::on) {
            term(x.terminal_a, 1.0);
            term(x.terminal_c, -1.0);
        } else if (x.kind == CellKind::basic) {
            term(x.terminal_p, 1.0);
            term(x.terminal_c, -1.0);
        } else {
            term(x.terminal_p, -1.0 / x.turns_ratio);
            term(x.terminal_c, 1.0 / x.turns_ratio);
        }
        return out;
    }

    std::vector<double> injection(std::size_t k, CellState s) const {
        std::vector<double> rhs(ny_, 0.0);
        for (const auto& [node, w] : terminal_weights(k, s)) rhs[node] -= w;
        return rhs;
    }

    const Circuit& circuit_;
    std::size_t nn_ = 0, nv_ = 0, nc_ = 0, ncell_ = 0, ny_ = 0, nx_ = 0;
    std::vector<LuFactorization> lu_;
    std::vector<double> constant_response_;
    std::vector<std::vector<double>> cap_response_;
    std::vector<std::vector<double>> on_response_;
    std::vector<std::vector<double>> off_response_;
};

Propagator make_propagator(const Topology& t, double h) {
    const std::size_t n = t.b.size();
    DenseMatrix lhs = DenseMatrix::identity(n);
    DenseMatrix rhs = DenseMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            lhs(i, j) -= 0.5 * h * t.m(i, j);
            rhs(i, j) += 0.5 * h * t.m(i, j);
        }
    }
    std::vector<double> hb(n);
    for (std::size_t i = 0; i < n; ++i) hb[i] = h * t.b[i];
    try {
        const LuFactorization lu(std::move(lhs));
        return {lu.solve(rhs), lu.solve(hb)};
    } catch (const SingularMatrixError& e) {
        throw NumericalError(std::string("singular trapezoidal step: ") + e.what(), 0);
    }
}

std::uint64_t topology_key(std::span<const CellState> states) {
    std::uint64_t key = 0;
    for (const auto s : states) key = key * 3 + static_cast<std::uint64_t>(s);
    return key;
}

class Integrator {
public:
    Integrator(const Circuit& circuit, const SimConfig& config, const OracleOptions& options, SwitchedTrace& out)
        : circuit_(circuit), config_(config), options_(options), net_(circuit), out_(out) {
        stride_ = net_.ny() + net_.nx();
        row_.resize(stride_);
        states_.assign(net_.cells(), CellState::on);
        x_.resize(net_.nx());
        for (std::size_t k = 0; k < net_.cells(); ++k) x_[k] = circuit.cells[k].initial_current;
        for (std::size_t i = 0; i < net_.caps(); ++i) x_[net_.cells() + i] = circuit.capacitors[i].initial_volts;
    }

    void run() {
        const std::size_t count = config_.period_count();
        out_.periods.reserve(count);
        for (std::size_t n = 0; n < count; ++n) run_period(n);
    }

private:
    const Topology& topology() {
        const auto key = topology_key(states_);
        auto it = topologies_.find(key);
        if (it == topologies_.end()) it = topologies_.emplace(key, net_.build(states_)).first;
        return it->second;
    }

    const Propagator& cached_propagator(double h) {
        const auto key = std::make_pair(topology_key(states_), h);
        auto it = propagators_.find(key);
        if (it == propagators_.end()) it = propagators_.emplace(key, make_propagator(topology(), h)).first;
        return it->second;
    }

    std::vector<double> advance(const Propagator& p, std::span<const double> x) const {
        auto y = p.p.multiply(x);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.q[i];
        for (std::size_t k = 0; k < net_.cells(); ++k) {
            if (states_[k] == CellState::open) y[k] = 0.0;
        }
        return y;
    }

    double stored_energy() const {
        double e = 0.0;
        for (std::size_t k = 0; k < net_.cells(); ++k) e += 0.5 * circuit_.cells[k].inductance * x_[k] * x_[k];
        for (std::size_t i = 0; i < net_.caps(); ++i) {
            const double v = x_[net_.cells() + i];
            e += 0.5 * circuit_.capacitors[i].farads * v * v;
        }
        return e;
    }

    // Emits the sample at absolute time t with the current topology and
    // accumulates the period integrals.
    void emit(double t) {
        const auto key = topology_key(states_);
        if (have_last_ && t == last_t_ && key == last_key_) return;
        const Topology& top = topology();
        const auto y = top.n.multiply(x_);
        const std::size_t nn = net_.nodes();
        const std::size_t nv = net_.vsources();
        const std::size_t nc = net_.caps();
        const std::size_t ncell = net_.cells();
        for (std::size_t i = 0; i < nn; ++i) row_[i] = y[i] + top.c[i];
        for (std::size_t k = 0; k < ncell; ++k) row_[nn + k] = x_[k];
        for (std::size_t i = 0; i < nc; ++i) row_[nn + ncell + i] = x_[ncell + i];
        for (std::size_t i = 0; i < nv + nc; ++i) row_[nn + ncell + nc + i] = y[nn + i] + top.c[nn + i];

        const auto voltage = [&](const std::string& node) {
            const std::size_t i = circuit_.node_index(node);
            return i == kGround ? 0.0 : row_[i];
        };
        double p_in = 0.0;
        for (std::size_t i = 0; i < nv; ++i) p_in -= circuit_.vsources[i].volts * row_[nn + ncell + nc + i];
        double p_r = 0.0;
        for (const auto& r : circuit_.resistors) {
            const double dv = voltage(r.n1) - voltage(r.n2);
            p_r += dv * dv / r.ohms;
        }
        double p_out = 0.0;
        for (const auto& s : circuit_.isources) p_out += s.amps * (voltage(s.pos) - voltage(s.neg));

        if (have_period_sample_) {
            const double h = t - last_t_;
            for (std::size_t i = 0; i < stride_; ++i) integral_[i] += 0.5 * h * (last_row_[i] + row_[i]);
            power_[0] += 0.5 * h * (last_power_[0] + p_in);
            power_[1] += 0.5 * h * (last_power_[1] + p_r);
            power_[2] += 0.5 * h * (last_power_[2] + p_out);
        }
        last_row_ = row_;
        last_power_ = {p_in, p_r, p_out};
        last_t_ = t;
        last_key_ = key;
        have_last_ = true;
        have_period_sample_ = true;

        if (options_.keep_samples) {
            out_.sample_t.push_back(t);
            out_.sample_values.insert(out_.sample_values.end(), row_.begin(), row_.end());
        }
    }

    void open_cell(std::size_t k, SwitchedPeriod& rec, double t) {
        states_[k] = CellState::open;
        x_[k] = 0.0;
        rec.diode_opened[k] = true;
        rec.conduction_fraction[k] = (t - rec.t_start) / config_.period;
    }

    // One grid step of length h starting at absolute time t, splitting it at
    // diode zero crossings.
    void step(double t, double h, SwitchedPeriod& rec) {
        double remaining = h;
        bool whole = true;
        while (remaining > 0.0) {
            const auto x_new = whole ? advance(cached_propagator(h), x_)
                                     : advance(make_propagator(topology(), remaining), x_);
            double theta = 2.0;
            std::size_t hit = 0;
            for (std::size_t k = 0; k < net_.cells(); ++k) {
                if (states_[k] != CellState::off || circuit_.cells[k].switch_type != SwitchType::diode) continue;
                if (x_[k] > 0.0 && x_new[k] <= 0.0) {
                    const double th = x_[k] / (x_[k] - x_new[k]);
                    if (th < theta) {
                        theta = th;
                        hit = k;
                    }
                }
            }
            if (theta > 1.0) {
                x_ = x_new;
                return;
            }
            const double dt = theta * remaining;
            if (theta < 1.0) {
                x_ = advance(make_propagator(topology(), dt), x_);
            } else {
                x_ = x_new;
            }
            x_[hit] = 0.0;
            const double t_event = t + (h - remaining) + dt;
            emit(t_event);
            open_cell(hit, rec, t_event);
            emit(t_event);
            remaining -= dt;
            whole = false;
            if (remaining <= 1e-15 * h) return;
        }
    }

    void run_period(std::size_t n) {
        const double T = config_.period;
        const double t0 = static_cast<double>(n) * T;
        SwitchedPeriod rec;
        rec.index = n;
        rec.t_start = t0;
        rec.diode_opened.assign(net_.cells(), false);
        rec.conduction_fraction.assign(net_.cells(), 1.0);

        integral_.assign(stride_, 0.0);
        power_ = {0.0, 0.0, 0.0};
        have_period_sample_ = false;
        const double e_start = stored_energy();

        std::vector<double> taus{0.0, T};
        for (const auto& c : circuit_.cells) taus.push_back(std::clamp(c.duty, 0.0, 1.0) * T);
        std::sort(taus.begin(), taus.end());
        taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

        for (std::size_t j = 0; j + 1 < taus.size(); ++j) {
            const double ta = taus[j];
            const double tb = taus[j + 1];
            const double len = tb - ta;
            if (!(len > 0.0)) continue;
            const double mid = 0.5 * (ta + tb);
            for (std::size_t k = 0; k < net_.cells(); ++k) {
                const auto& cell = circuit_.cells[k];
                if (mid < cell.duty * T) {
                    states_[k] = CellState::on;
                } else if (!rec.diode_opened[k]) {
                    states_[k] = CellState::off;
                    if (cell.switch_type == SwitchType::diode && x_[k] <= 0.0) {
                        // Already at or below zero when the switch opens.
                        emit(t0 + ta);
                        open_cell(k, rec, t0 + ta);
                    }
                }
            }
            emit(t0 + ta);
            const long steps = std::max(1L, std::lround(static_cast<double>(options_.substeps) * len / T));
            const double h = len / static_cast<double>(steps);
            for (long s = 0; s < steps; ++s) {
                const double ts = t0 + ta + static_cast<double>(s) * h;
                step(ts, h, rec);
                const double te = s + 1 == steps ? t0 + tb : t0 + ta + static_cast<double>(s + 1) * h;
                emit(te);
            }
        }

        rec.mean.resize(stride_);
        for (std::size_t i = 0; i < stride_; ++i) rec.mean[i] = integral_[i] / T;
        rec.input_power = power_[0] / T;
        rec.dissipated_power = power_[1] / T;
        rec.delivered_power = power_[2] / T;
        rec.stored_energy_change = stored_energy() - e_start;
        out_.periods.push_back(std::move(rec));
    }

    const Circuit& circuit_;
    const SimConfig& config_;
    const OracleOptions& options_;
    SwitchedNetwork net_;
    SwitchedTrace& out_;

    std::size_t stride_ = 0;
    std::vector<CellState> states_;
    std::vector<double> x_;
    std::map<std::uint64_t, Topology> topologies_;
    std::map<std::pair<std::uint64_t, double>, Propagator> propagators_;

    std::vector<double> row_;
    std::vector<double> last_row_;
    std::vector<double> integral_;
    std::array<double, 3> power_{};
    std::array<double, 3> last_power_{};
    double last_t_ = 0.0;
    std::uint64_t last_key_ = 0;
    bool have_last_ = false;
    bool have_period_sample_ = false;
};

}  // namespace

SwitchedTrace simulate_switched(const Circuit& circuit, const SimConfig& config, const OracleOptions& options) {
    config.check();
    if (options.substeps < kMinOracleSubsteps) {
        throw std::invalid_argument("oracle substeps must be at least " + std::to_string(kMinOracleSubsteps));
    }
    SwitchedTrace out;
    out.period = config.period;
    out.substeps = options.substeps;
    out.node_count = circuit.nodes.size();
    out.cell_count = circuit.cells.size();
    out.capacitor_count = circuit.capacitors.size();
    out.vsource_count = circuit.vsources.size();
    for (const auto& n : circuit.nodes) out.signals.push_back("v(" + n + ")");
    for (const auto& x : circuit.cells) out.signals.push_back("iL(" + x.name + ")");
    for (const auto& c : circuit.capacitors) out.signals.push_back("vC(" + c.name + ")");
    for (const auto& v : circuit.vsources) out.signals.push_back("i(" + v.name + ")");
    for (const auto& c : circuit.capacitors) out.signals.push_back("i(" + c.name + ")");

    Integrator integrator(circuit, config, options, out);
    integrator.run();
    return out;
}

std::vector<std::string> compared_signals(const Circuit& circuit) {
    std::vector<std::string> names;
    for (const auto& n : circuit.nodes) names.push_back("v(" + n + ")");
    for (const auto& x : circuit.cells) names.push_back("iL(" + x.name + ")");
    for (const auto& c : circuit.capacitors) names.push_back("vC(" + c.name + ")");
    return names;
}

PeriodSeries period_series(const Trace& trace, std::span<const std::string> names) {
    PeriodSeries s;
    s.period = trace.period;
    const auto& labels = trace.layout->labels();
    for (const auto& name : names) {
        const auto it = std::find(labels.begin(), labels.end(), name);
        if (it == labels.end()) throw std::out_of_range("no averaged unknown named " + name);
        s.names.push_back(name);
        s.values.push_back(trace.series(static_cast<std::size_t>(it - labels.begin())));
    }
    return s;
}

PeriodSeries period_series(const SwitchedTrace& trace, std::span<const std::string> names) {
    PeriodSeries s;
    s.period = trace.period;
    for (const auto& name : names) {
        const std::size_t idx = trace.signal_index(name);
        std::vector<double> v;
        v.reserve(trace.periods.size());
        for (const auto& p : trace.periods) v.push_back(p.mean[idx]);
        s.names.push_back(name);
        s.values.push_back(std::move(v));
    }
    return s;
}

double ErrorReport::max_error() const {
    double m = 0.0;
    for (const auto& s : signals) m = std::max(m, s.max_error);
    return m;
}

double normalization_floor(std::string_view signal) {
    constexpr double kVoltFloor = 0.1;
    constexpr double kAmpFloor = 0.1;
    return !signal.empty() && signal.front() == 'i' ? kAmpFloor : kVoltFloor;
}

ErrorReport compare(const PeriodSeries& candidate, const PeriodSeries& reference, double skip_fraction) {
    if (!(skip_fraction >= 0.0 && skip_fraction < 0.5)) {
        throw std::invalid_argument("skip fraction must lie in [0, 0.5)");
    }
    if (candidate.names != reference.names) throw std::invalid_argument("compared series have different signals");
    if (std::abs(candidate.period - reference.period) > 1e-12 * reference.period) {
        throw std::invalid_argument("compared series have different switching periods");
    }
    const std::size_t count = reference.period_count();
    if (candidate.period_count() != count) throw std::invalid_argument("compared series have different durations");
    if (count == 0) throw std::invalid_argument("nothing to compare");

    ErrorReport report;
    report.first_retained = static_cast<std::size_t>(std::ceil(skip_fraction * static_cast<double>(count) - 1e-9));
    for (std::size_t s = 0; s < reference.names.size(); ++s) {
        const auto& a = candidate.values[s];
        const auto& b = reference.values[s];
        SignalError e;
        e.name = reference.names[s];
        e.steady = b.back();
        const double scale = std::max(std::abs(e.steady), normalization_floor(e.name));
        for (std::size_t n = 0; n < count; ++n) {
            const double err = std::abs(a[n] - b[n]) / scale;
            if (n < report.first_retained) {
                e.startup_error = std::max(e.startup_error, err);
            } else if (err > e.max_error || (n == report.first_retained && err >= e.max_error)) {
                e.max_error = err;
                e.worst_period = n;
            }
        }
        report.signals.push_back(std::move(e));
    }
    return report;
}

}  // namespace cellsim
