#pragma once

// =============================================================================
// Averaged switching cell
// =============================================================================
// Over one switching period [0, T) the inductor current is piecewise linear
// (linear ripple + quasi steady state): it starts at `i_start`, ramps with the
// on-interval voltage for duty*T to `i_switch`, then ramps with the off-interval
// voltage for passive_duty*T to `i_end`. In DCM the passive interval ends where
// the current reaches zero and the rest of the period carries no current.
// =============================================================================

#include <stdexcept>

#include "cellsim/netlist.hpp"

namespace cellsim {

struct CellPeriodInput {
    double i_start = 0.0;      ///< inductor current at the period start [A]
    double on_voltage = 0.0;   ///< inductor voltage while the active switch conducts [V]
    double off_voltage = 0.0;  ///< inductor voltage while the passive device conducts [V]
    double duty = 0.5;
    double inductance = 1.0;   ///< [H]
    double period = 1.0;       ///< switching period [s]
};

enum class ModeTag { ccm, dcm };

struct ConductionMode {
    ModeTag tag = ModeTag::ccm;
    double passive_duty = 0.0;  ///< 1 - d in CCM, d2 in DCM

    [[nodiscard]] static ConductionMode ccm(double duty) { return {ModeTag::ccm, 1.0 - duty}; }
    [[nodiscard]] static ConductionMode dcm(double d2) { return {ModeTag::dcm, d2}; }
    [[nodiscard]] bool is_dcm() const { return tag == ModeTag::dcm; }
    bool operator==(const ConductionMode&) const = default;
};

/// Solved per-period quantities of one cell.
struct CellStepSolution {
    double i_start = 0.0;
    double i_switch = 0.0;  ///< current at t = duty*T
    double i_end = 0.0;     ///< current at t = T (zero in DCM)
    double avg_switch = 0.0;
    double avg_diode = 0.0;
    double avg_inductor = 0.0;
    double avg_inductor_voltage = 0.0;
    double on_voltage = 0.0;
    double off_voltage = 0.0;
    double duty = 0.0;
    ConductionMode mode;
};

struct PortVoltages {
    double on_voltage = 0.0;
    double off_voltage = 0.0;
    bool operator==(const PortVoltages&) const = default;
};

/// Thrown by d2_from_voltages when the off-interval voltage cannot discharge
/// the inductor.
class NoZeroCrossing : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Passive-interval duty that brings the inductor current to zero at the end of
/// the passive interval, starting from `i_start`. Reduces to -(V1/V2)*d when
/// i_start = 0. Clamped at zero when the on-interval already ends at or below
/// zero current.
[[nodiscard]] double d2_from_voltages(double i_start, double on_voltage, double off_voltage,
                                      double duty, double inductance, double period);

/// Synchronous cells are always CCM. Diode cells are DCM iff a zero crossing
/// exists and d + d2 < 1.
[[nodiscard]] ConductionMode classify_mode(const CellPeriodInput& input, SwitchType type);

[[nodiscard]] CellStepSolution cell_averages(const CellPeriodInput& input, const ConductionMode& mode);

/// Port voltages of a basic cell with terminal voltages v_a, v_p, v_c.
[[nodiscard]] PortVoltages basic_port_map(double v_a, double v_p, double v_c);

/// Port voltages of the flyback cell (isolation removed, common terminal c
/// shared by both windings): the magnetizing inductance sees v_a - v_c while
/// the switch conducts and the reflected secondary -(v_p - v_c)/n while the
/// rectifier conducts.
[[nodiscard]] PortVoltages flyback_port_map(double v_a, double v_p, double v_c, double turns_ratio);

}  // namespace cellsim
