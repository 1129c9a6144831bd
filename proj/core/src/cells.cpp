#include "cellsim/cells.hpp"

#include <algorithm>

namespace cellsim {

namespace {

void check_input(const CellPeriodInput& in) {
    if (!(in.duty > 0.0 && in.duty < 1.0)) throw std::invalid_argument("duty must lie in (0, 1)");
    if (!(in.inductance > 0.0)) throw std::invalid_argument("inductance must be positive");
    if (!(in.period > 0.0)) throw std::invalid_argument("switching period must be positive");
}

}  // namespace

double d2_from_voltages(double i_start, double on_voltage, double off_voltage, double duty,
                        double inductance, double period) {
    if (!(off_voltage < 0.0)) {
        throw NoZeroCrossing("off-interval voltage is non-negative: no zero crossing");
    }
    const double d2 = -(on_voltage / off_voltage) * duty - i_start * inductance / (off_voltage * period);
    return std::max(d2, 0.0);
}

ConductionMode classify_mode(const CellPeriodInput& input, SwitchType type) {
    check_input(input);
    if (type == SwitchType::synchronous || !(input.off_voltage < 0.0)) {
        return ConductionMode::ccm(input.duty);
    }
    const double d2 = d2_from_voltages(input.i_start, input.on_voltage, input.off_voltage, input.duty,
                                       input.inductance, input.period);
    if (input.duty + d2 >= 1.0) return ConductionMode::ccm(input.duty);
    return ConductionMode::dcm(d2);
}

CellStepSolution cell_averages(const CellPeriodInput& in, const ConductionMode& mode) {
    check_input(in);
    const double d = in.duty;
    const double dp = mode.passive_duty;
    const double slope_time = in.period / in.inductance;

    CellStepSolution s;
    s.duty = d;
    s.mode = mode;
    s.on_voltage = in.on_voltage;
    s.off_voltage = in.off_voltage;
    s.i_start = in.i_start;
    s.i_switch = in.i_start + in.on_voltage * d * slope_time;
    s.i_end = mode.is_dcm() ? 0.0 : s.i_switch + in.off_voltage * dp * slope_time;
    s.avg_inductor_voltage = d * in.on_voltage + dp * in.off_voltage;
    s.avg_switch = 0.5 * d * (s.i_start + s.i_switch);
    s.avg_diode = 0.5 * dp * (s.i_switch + s.i_end);
    s.avg_inductor = s.avg_switch + s.avg_diode;
    return s;
}

PortVoltages basic_port_map(double v_a, double v_p, double v_c) {
    return {v_a - v_c, v_p - v_c};
}

PortVoltages flyback_port_map(double v_a, double v_p, double v_c, double turns_ratio) {
    if (!(turns_ratio > 0.0)) throw std::invalid_argument("turns ratio must be positive");
    return {v_a - v_c, -(v_p - v_c) / turns_ratio};
}

}  // namespace cellsim
