#include "cellsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cellsim {

namespace {

constexpr double kNegativeCurrentSlack = 1e-9;
constexpr std::size_t kMaxKeptWarnings = 32;

std::vector<ConductionMode> predict_modes(const Circuit& circuit, const SimConfig& config,
                                          const PeriodState& state,
                                          std::span<const std::optional<PortVoltages>> ports) {
    std::vector<ConductionMode> modes;
    modes.reserve(circuit.cells.size());
    for (std::size_t i = 0; i < circuit.cells.size(); ++i) {
        const auto& cell = circuit.cells[i];
        if (i >= ports.size() || !ports[i]) {
            modes.push_back(ConductionMode::ccm(cell.duty));
            continue;
        }
        const CellPeriodInput in{state.cell_current[i], ports[i]->on_voltage, ports[i]->off_voltage,
                                 cell.duty, cell.inductance, config.period};
        modes.push_back(classify_mode(in, cell.switch_type));
    }
    return modes;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

}  // namespace

SimConfig SimConfig::from_circuit(const Circuit& circuit) {
    SimConfig c;
    c.duration = circuit.directives.duration;
    c.period = circuit.directives.period();
    return c;
}

std::size_t SimConfig::period_count() const {
    return static_cast<std::size_t>(std::floor(duration / period + 1e-9));
}

void SimConfig::check() const {
    if (!(period > 0.0)) throw std::invalid_argument("switching period must be positive");
    if (period_count() < 1) throw std::invalid_argument("duration shorter than one switching period");
    if (!(dcm_fixed_point_tol > 0.0)) throw std::invalid_argument("DCM tolerance must be positive");
    if (dcm_max_iters < 1) throw std::invalid_argument("DCM iteration limit must be at least 1");
}

void RunningStats::add(double v) {
    if (count == 0) {
        minimum = maximum = v;
    } else {
        minimum = std::min(minimum, v);
        maximum = std::max(maximum, v);
    }
    sum += v;
    ++count;
}

std::vector<double> Trace::series(std::size_t slot) const {
    std::vector<double> out;
    out.reserve(periods.size());
    for (const auto& p : periods) out.push_back(p.x.at(slot));
    return out;
}

StepResult step(const Circuit& circuit, const SimConfig& config,
                const std::shared_ptr<const UnknownLayout>& layout, const PeriodState& state,
                std::span<const std::optional<PortVoltages>> previous_ports) {
    const auto& L = *layout;
    const std::size_t ncells = circuit.cells.size();
    const std::size_t period = state.period;
    StepResult result;

    std::vector<ConductionMode> modes = predict_modes(circuit, config, state, previous_ports);
    for (std::size_t i = 0; i < ncells; ++i) {
        const auto& p = i < previous_ports.size() ? previous_ports[i] : std::nullopt;
        if (p && circuit.cells[i].switch_type == SwitchType::diode && !(p->off_voltage < 0.0)) {
            result.warnings.push_back("period " + std::to_string(period) + ": cell " + circuit.cells[i].name +
                                      " off-interval voltage is non-negative; treated as CCM");
        }
    }

    std::vector<int> flips(ncells, 0);
    std::vector<double> x;
    for (int iter = 1;; ++iter) {
        const LinearSystem sys = assemble(circuit, layout, state, modes);
        x = solve(sys, period);
        result.iterations = iter;

        bool changed = false;
        double worst_delta = 0.0;
        for (std::size_t i = 0; i < ncells; ++i) {
            const auto& cell = circuit.cells[i];
            if (cell.switch_type != SwitchType::diode) continue;
            const CellSlots s = L.cell(i);
            const double on = x[s.on_voltage];
            const double off = x[s.off_voltage];
            const double i0 = state.cell_current[i];

            if (!modes[i].is_dcm()) {
                if (x[s.i_end] < -kNegativeCurrentSlack && off < 0.0) {
                    const double d2 = d2_from_voltages(i0, on, off, cell.duty, cell.inductance, config.period);
                    if (cell.duty + d2 < 1.0) {
                        modes[i] = ConductionMode::dcm(d2);
                        ++flips[i];
                        changed = true;
                    }
                }
                continue;
            }
            if (!(off < 0.0)) {
                modes[i] = ConductionMode::ccm(cell.duty);
                ++flips[i];
                changed = true;
                result.warnings.push_back("period " + std::to_string(period) + ": cell " + cell.name +
                                          " off-interval voltage is non-negative; treated as CCM");
                continue;
            }
            const double d2 = d2_from_voltages(i0, on, off, cell.duty, cell.inductance, config.period);
            if (cell.duty + d2 >= 1.0) {
                modes[i] = ConductionMode::ccm(cell.duty);
                ++flips[i];
                changed = true;
            } else {
                const double delta = std::abs(d2 - modes[i].passive_duty);
                worst_delta = std::max(worst_delta, delta);
                if (delta > config.dcm_fixed_point_tol) {
                    modes[i].passive_duty = d2;
                    changed = true;
                }
            }
        }
        if (!changed) break;

        const int max_flips = flips.empty() ? 0 : *std::max_element(flips.begin(), flips.end());
        if (iter >= config.dcm_max_iters || max_flips > config.dcm_max_iters) {
            throw ConvergenceError("DCM fixed point not reached in period " + std::to_string(period) +
                                       " after " + std::to_string(iter) + " iterations (last d2 change " +
                                       fmt(worst_delta) + ", mode flips " + std::to_string(max_flips) + ")",
                                   period);
        }
    }

    result.cells.reserve(ncells);
    for (std::size_t i = 0; i < ncells; ++i) {
        const auto& cell = circuit.cells[i];
        auto sol = decode_cell(L, x, i, state.cell_current[i], cell.duty, modes[i]);
        if (modes[i].is_dcm()) {
            // The period ends at exactly zero current; the solved endpoint only
            // differs from zero by the fixed-point residual.
            const CellSlots s = L.cell(i);
            const double dp = modes[i].passive_duty;
            sol.i_end = 0.0;
            sol.avg_diode = 0.5 * dp * sol.i_switch;
            sol.avg_inductor = sol.avg_switch + sol.avg_diode;
            sol.avg_inductor_voltage = cell.duty * sol.on_voltage + dp * sol.off_voltage;
            x[s.i_end] = sol.i_end;
            x[s.avg_diode] = sol.avg_diode;
            x[s.avg_inductor] = sol.avg_inductor;
            x[s.avg_inductor_voltage] = sol.avg_inductor_voltage;
        }
        result.cells.push_back(sol);
    }

    PeriodState next;
    next.period = period + 1;
    next.cap_voltage.resize(circuit.capacitors.size());
    next.cap_current.resize(circuit.capacitors.size());
    for (std::size_t i = 0; i < circuit.capacitors.size(); ++i) {
        next.cap_voltage[i] = x[L.capacitor_voltage(i)];
        next.cap_current[i] = x[L.capacitor_current(i)];
    }
    next.cell_current.resize(ncells);
    for (std::size_t i = 0; i < ncells; ++i) {
        next.cell_current[i] = result.cells[i].mode.is_dcm() ? 0.0 : result.cells[i].i_end;
    }
    result.next = std::move(next);
    result.x = std::move(x);
    return result;
}

Trace run(const Circuit& circuit, const SimConfig& config) {
    config.check();
    const double own = circuit.directives.period();
    if (std::abs(own - config.period) > 1e-12 * own) {
        throw std::invalid_argument("configured period does not match the circuit's switching frequency");
    }
    Trace trace;
    trace.layout = std::make_shared<const UnknownLayout>(circuit);
    trace.period = config.period;
    trace.running.resize(trace.layout->size());

    const std::size_t count = config.period_count();
    trace.periods.reserve(count);

    PeriodState state = PeriodState::initial(circuit);
    std::vector<std::optional<PortVoltages>> ports(circuit.cells.size());
    for (std::size_t n = 0; n < count; ++n) {
        StepResult r = step(circuit, config, trace.layout, state, ports);
        for (auto& w : r.warnings) {
            if (trace.warnings.size() < kMaxKeptWarnings) trace.warnings.push_back(std::move(w));
            else ++trace.suppressed_warnings;
        }
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            ports[i] = PortVoltages{r.cells[i].on_voltage, r.cells[i].off_voltage};
        }
        for (std::size_t k = 0; k < r.x.size(); ++k) trace.running[k].add(r.x[k]);

        PeriodRecord rec;
        rec.index = n;
        rec.t_start = static_cast<double>(n) * config.period;
        rec.x = std::move(r.x);
        rec.cells = std::move(r.cells);
        rec.state = std::move(state);
        rec.iterations = r.iterations;
        trace.periods.push_back(std::move(rec));
        state = std::move(r.next);
    }
    trace.final_state = std::move(state);
    return trace;
}

Trace run(const Circuit& circuit) { return run(circuit, SimConfig::from_circuit(circuit)); }

LinearSystem assemble_period(const Circuit& circuit, const Trace& trace, std::size_t period) {
    const auto& rec = trace.periods.at(period);
    std::vector<ConductionMode> modes;
    modes.reserve(rec.cells.size());
    for (const auto& c : rec.cells) modes.push_back(c.mode);
    return assemble(circuit, trace.layout, rec.state, modes);
}

}  // namespace cellsim
