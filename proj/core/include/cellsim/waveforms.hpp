#pragma once

// =============================================================================
// Instantaneous waveform reconstruction and post-processing
// =============================================================================

#include <cstddef>
#include <span>
#include <vector>

#include "cellsim/engine.hpp"
#include "cellsim/netlist.hpp"

namespace cellsim {

struct Breakpoint {
    double t = 0.0;
    double value = 0.0;
    bool operator==(const Breakpoint&) const = default;
};

/// Linear interpolation between breakpoints with strictly increasing times.
class PiecewiseWaveform {
public:
    PiecewiseWaveform() = default;
    explicit PiecewiseWaveform(std::vector<Breakpoint> points);

    /// Appends a breakpoint. A point identical to the last one is dropped;
    /// any other non-increasing time is rejected.
    void append(double t, double value);

    [[nodiscard]] std::span<const Breakpoint> points() const noexcept { return points_; }
    [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] double start() const { return points_.front().t; }
    [[nodiscard]] double end() const { return points_.back().t; }
    [[nodiscard]] double value_at(double t) const;

private:
    std::vector<Breakpoint> points_;
};

struct WaveformStats {
    double average = 0.0;
    double minimum = 0.0;
    double maximum = 0.0;
    double rms = 0.0;
};

struct TimeWindow {
    double start = 0.0;
    double end = 0.0;
};

struct Harmonic {
    int index = 0;
    double magnitude = 0.0;  ///< amplitude of the cosine term; signed mean for index 0
    double phase = 0.0;      ///< radians, x(t) = sum magnitude * cos(k w t + phase)
};

/// Inductor current of one cell: (nT, i_start), (nT + dT, i_switch),
/// [(nT + (d + d2)T, 0) in DCM], ((n+1)T, i_end).
[[nodiscard]] PiecewiseWaveform reconstruct_inductor(const Trace& trace, std::size_t cell);

/// Capacitor voltage: each period's solved v_C plus the zero-mean ripple
/// obtained by integrating the deviation of the instantaneous capacitor
/// current (KCL at the capacitor's node with reconstructed cell currents and
/// period-average resistor/source currents). Breakpoints are the current
/// breakpoints plus the ripple extrema. Period boundaries take the mean of the
/// two adjacent periods' values and interior points are offset so that the
/// waveform's mean over every period equals the solved v_C.
///
/// Throws std::invalid_argument when the capacitor current at its node is not
/// determined by the other elements (another capacitor or a voltage source on
/// the node).
[[nodiscard]] PiecewiseWaveform reconstruct_capacitor(const Circuit& circuit, const Trace& trace,
                                                      std::size_t capacitor);

/// Exact average/rms over the window; min/max over breakpoints in the window.
[[nodiscard]] WaveformStats stats(const PiecewiseWaveform& w, TimeWindow window);

/// Fourier coefficients by exact integration over linear segments. The window
/// must span a whole number of fundamental periods.
[[nodiscard]] std::vector<Harmonic> spectrum(const PiecewiseWaveform& w, TimeWindow window, double fundamental,
                                             int n_harmonics);

/// The last `fraction` of the waveform's span.
[[nodiscard]] TimeWindow tail_window(const PiecewiseWaveform& w, double fraction);

}  // namespace cellsim
