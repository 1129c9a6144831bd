#pragma once

// =============================================================================
// CSV, SVG and text output
// =============================================================================

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cellsim/engine.hpp"
#include "cellsim/mna.hpp"
#include "cellsim/oracle.hpp"
#include "cellsim/waveforms.hpp"

namespace cellsim {

/// Shortest decimal form that round-trips to the same double.
[[nodiscard]] std::string format_number(double v);

struct NamedWaveform {
    std::string name;
    PiecewiseWaveform waveform;
};

/// `source,period,t_start,mode,d,d_p,<layout labels>`; additional cells get
/// `mode(X),d(X),d_p(X)` columns after `d_p`.
void write_period_csv(std::ostream& os, const Circuit& circuit, const Trace& trace);

/// Same leading columns for the switched reference (mode is DCM when the
/// passive device opened, d_p is its conduction time), then the period means.
void write_period_csv(std::ostream& os, const Circuit& circuit, const SwitchedTrace& trace);

/// Long format `source,signal,t,value`.
void write_waveform_csv(std::ostream& os, std::string_view source, std::span<const NamedWaveform> waveforms);
void write_sample_csv(std::ostream& os, const SwitchedTrace& trace);

/// One row per equation: `row,label,<column labels>,x,z`.
void write_system_csv(std::ostream& os, const LinearSystem& system, std::span<const double> x);

/// Stacked line plots, one series per panel.
void write_svg(std::ostream& os, std::span<const NamedWaveform> panels, std::string_view title);

/// `signal average minimum maximum rms` table.
void write_stats(std::ostream& os, std::span<const NamedWaveform> waveforms, TimeWindow window);

void write_error_report(std::ostream& os, const ErrorReport& report, double tolerance);

/// Inductor current of every cell and voltage of every capacitor whose current
/// is determined at its node, named "iL(X)" and "vC(C)".
[[nodiscard]] std::vector<NamedWaveform> reconstruct_all(const Circuit& circuit, const Trace& trace);

/// Oracle samples of the cell currents and capacitor voltages as waveforms.
/// Repeated sample times (topology changes) keep the first value.
[[nodiscard]] std::vector<NamedWaveform> sampled_waveforms(const SwitchedTrace& trace);

}  // namespace cellsim
