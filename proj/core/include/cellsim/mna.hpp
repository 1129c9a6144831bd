#pragma once

// =============================================================================
// Modified nodal analysis of the discretized averaged circuit
// =============================================================================
// Unknown vector layout (one equation row per unknown, same order):
//
//   [ node voltages (n) | branch currents (m) | extra (k) ]
//
//   n: non-ground nodes in Circuit::nodes order
//   m: one per voltage source, then one per capacitor (netlist order)
//   k: one v_C per capacitor, then 8 per cell:
//      avg_switch, avg_diode, avg_inductor, avg_inductor_voltage,
//      i_switch, i_end, on_voltage, off_voltage
//
// Node rows are KCL with currents leaving the node counted positive.
// Capacitors use the series trapezoidal companion
//   v_C - R_C i_C = v_C,prev + R_C i_C,prev,   R_C = T/(2C).
// =============================================================================

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellsim/cells.hpp"
#include "cellsim/linalg.hpp"
#include "cellsim/netlist.hpp"

namespace cellsim {

class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& message, std::size_t period)
        : std::runtime_error(message), period_(period) {}
    [[nodiscard]] std::size_t period() const noexcept { return period_; }

private:
    std::size_t period_;
};

struct CellSlots {
    std::size_t avg_switch = 0;
    std::size_t avg_diode = 0;
    std::size_t avg_inductor = 0;
    std::size_t avg_inductor_voltage = 0;
    std::size_t i_switch = 0;
    std::size_t i_end = 0;
    std::size_t on_voltage = 0;
    std::size_t off_voltage = 0;
};

inline constexpr std::size_t kCellUnknowns = 8;

class UnknownLayout {
public:
    explicit UnknownLayout(const Circuit& circuit);

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t branch_count() const noexcept { return vsources_ + capacitors_; }
    [[nodiscard]] std::size_t extra_count() const noexcept { return capacitors_ + kCellUnknowns * cells_; }

    /// Slot of a node voltage; kGround passes through unchanged.
    [[nodiscard]] std::size_t node(std::size_t node_index) const { return node_index; }
    [[nodiscard]] std::size_t vsource_current(std::size_t i) const { return nodes_ + i; }
    [[nodiscard]] std::size_t capacitor_current(std::size_t i) const { return nodes_ + vsources_ + i; }
    [[nodiscard]] std::size_t capacitor_voltage(std::size_t i) const {
        return nodes_ + vsources_ + capacitors_ + i;
    }
    [[nodiscard]] CellSlots cell(std::size_t i) const;

    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::size_t nodes_ = 0;
    std::size_t vsources_ = 0;
    std::size_t capacitors_ = 0;
    std::size_t cells_ = 0;
    std::vector<std::string> labels_;
};

/// Carried state between switching periods.
struct PeriodState {
    std::vector<double> cap_voltage;  ///< v_C of the previous period
    std::vector<double> cap_current;  ///< i_C of the previous period
    std::vector<double> cell_current; ///< inductor current at the period start
    std::size_t period = 0;

    /// Netlist initial conditions; the fictitious previous capacitor current
    /// is zero, so the first companion step integrates from the initial voltage.
    [[nodiscard]] static PeriodState initial(const Circuit& circuit);
    bool operator==(const PeriodState&) const = default;
};

struct LinearSystem {
    DenseMatrix a;
    std::vector<double> z;
    std::shared_ptr<const UnknownLayout> layout;
};

[[nodiscard]] LinearSystem assemble(const Circuit& circuit, std::shared_ptr<const UnknownLayout> layout,
                                    const PeriodState& state, std::span<const ConductionMode> modes);
[[nodiscard]] LinearSystem assemble(const Circuit& circuit, const PeriodState& state,
                                    std::span<const ConductionMode> modes);

/// Dense LU solve. Throws NumericalError naming `period` when the matrix is
/// numerically singular.
[[nodiscard]] std::vector<double> solve(const LinearSystem& system, std::size_t period = 0);

/// Cell quantities read back from a solution vector.
[[nodiscard]] CellStepSolution decode_cell(const UnknownLayout& layout, std::span<const double> x,
                                           std::size_t cell, double i_start, double duty,
                                           const ConductionMode& mode);

}  // namespace cellsim
