#pragma once

// =============================================================================
// Switched-state reference simulator and averaged-vs-switched comparison
// =============================================================================
// Every cell is an ideal switch pair around its inductor. Within a period the
// active switch conducts on [0, dT), the passive device on [dT, T). A diode
// that reaches zero current opens for the rest of the period. Each topology is
// a linear time-invariant system in the state [cell currents | capacitor
// voltages], integrated with the trapezoidal rule on a uniform grid per
// sub-interval.
//
// Sample signal layout:
//   [ node voltages | cell currents | capacitor voltages |
//     voltage-source currents | capacitor currents ]
// =============================================================================

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cellsim/engine.hpp"
#include "cellsim/netlist.hpp"

namespace cellsim {

inline constexpr int kMinOracleSubsteps = 100;

enum class CellState : unsigned char { on, off, open };

struct SwitchedPeriod {
    std::size_t index = 0;
    double t_start = 0.0;
    std::vector<double> mean;                 ///< per signal, trapezoidal period mean
    std::vector<bool> diode_opened;           ///< per cell: passive device opened before period end
    std::vector<double> conduction_fraction;  ///< per cell: fraction of T the inductor conducts
    double input_power = 0.0;                 ///< delivered by voltage sources
    double dissipated_power = 0.0;            ///< in resistors
    double delivered_power = 0.0;             ///< absorbed by current sources
    double stored_energy_change = 0.0;        ///< inductors and capacitors, end minus start
};

struct SwitchedTrace {
    double period = 0.0;
    int substeps = 0;
    std::vector<std::string> signals;
    std::size_t node_count = 0;
    std::size_t cell_count = 0;
    std::size_t capacitor_count = 0;
    std::size_t vsource_count = 0;

    std::vector<SwitchedPeriod> periods;

    /// Sample times and values (row per sample, stride signals.size()).
    /// Topology changes appear as two samples at the same time (left and right
    /// limits). Empty unless samples were kept.
    std::vector<double> sample_t;
    std::vector<double> sample_values;

    [[nodiscard]] std::size_t sample_count() const noexcept { return sample_t.size(); }
    [[nodiscard]] std::span<const double> sample(std::size_t k) const {
        return {sample_values.data() + k * signals.size(), signals.size()};
    }
    [[nodiscard]] std::size_t signal_index(std::string_view name) const;
    [[nodiscard]] std::size_t cell_current_signal(std::size_t cell) const { return node_count + cell; }
    [[nodiscard]] std::size_t capacitor_voltage_signal(std::size_t c) const {
        return node_count + cell_count + c;
    }
};

struct OracleOptions {
    int substeps = 1000;
    bool keep_samples = true;
};

/// Throws std::invalid_argument for substeps below the minimum and
/// NumericalError when a topology's resistive network is singular.
[[nodiscard]] SwitchedTrace simulate_switched(const Circuit& circuit, const SimConfig& config,
                                              const OracleOptions& options);

/// Per-period values of named signals, one row per period.
struct PeriodSeries {
    double period = 0.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;  ///< values[signal][period]

    [[nodiscard]] std::size_t period_count() const { return values.empty() ? 0 : values.front().size(); }
};

/// Node voltages, cell inductor currents and capacitor voltages: "v(n)",
/// "iL(X)", "vC(C)".
[[nodiscard]] std::vector<std::string> compared_signals(const Circuit& circuit);

[[nodiscard]] PeriodSeries period_series(const Trace& trace, std::span<const std::string> names);
[[nodiscard]] PeriodSeries period_series(const SwitchedTrace& trace, std::span<const std::string> names);

struct SignalError {
    std::string name;
    double max_error = 0.0;      ///< normalized, over retained periods
    std::size_t worst_period = 0;
    double steady = 0.0;         ///< reference value in the final period
    double startup_error = 0.0;  ///< normalized, over skipped periods
};

struct ErrorReport {
    std::size_t first_retained = 0;
    std::vector<SignalError> signals;

    [[nodiscard]] double max_error() const;
    [[nodiscard]] bool within(double tolerance) const { return max_error() <= tolerance; }
};

/// Unit floor for normalization: 0.1 V for voltages, 0.1 A for currents.
[[nodiscard]] double normalization_floor(std::string_view signal);

/// Per signal: max over periods >= first_retained of |a - b| / max(|b_final|, floor).
/// `reference` supplies the steady value. Throws std::invalid_argument on
/// mismatched signals, period counts or period lengths.
[[nodiscard]] ErrorReport compare(const PeriodSeries& candidate, const PeriodSeries& reference,
                                  double skip_fraction);

}  // namespace cellsim
