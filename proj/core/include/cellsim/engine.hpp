#pragma once

// =============================================================================
// Averaged-circuit time stepping, one switching period per step
// =============================================================================

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellsim/cells.hpp"
#include "cellsim/mna.hpp"
#include "cellsim/netlist.hpp"

namespace cellsim {

struct SimConfig {
    double duration = 0.0;
    double period = 0.0;
    double dcm_fixed_point_tol = 1e-9;
    int dcm_max_iters = 20;

    [[nodiscard]] static SimConfig from_circuit(const Circuit& circuit);
    /// floor(duration / period), tolerant to representation error.
    [[nodiscard]] std::size_t period_count() const;
    void check() const;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct PeriodRecord {
    std::size_t index = 0;
    double t_start = 0.0;
    std::vector<double> x;                ///< solved unknowns, UnknownLayout order
    std::vector<CellStepSolution> cells;
    PeriodState state;                    ///< state at the start of this period
    int iterations = 0;                   ///< assemble/solve passes used
};

struct RunningStats {
    double sum = 0.0;
    double minimum = 0.0;
    double maximum = 0.0;
    std::size_t count = 0;

    void add(double v);
    [[nodiscard]] double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

struct Trace {
    std::shared_ptr<const UnknownLayout> layout;
    double period = 0.0;
    std::vector<PeriodRecord> periods;
    std::vector<RunningStats> running;  ///< per unknown, over all periods
    PeriodState final_state;
    std::vector<std::string> warnings;
    std::size_t suppressed_warnings = 0;

    /// Per-period values of one unknown.
    [[nodiscard]] std::vector<double> series(std::size_t slot) const;
};

struct StepResult {
    std::vector<double> x;
    std::vector<CellStepSolution> cells;
    PeriodState next;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Advances one switching period. `previous_ports` holds each cell's solved
/// port voltages from the previous period (nullopt for the first period) and
/// seeds the mode prediction.
[[nodiscard]] StepResult step(const Circuit& circuit, const SimConfig& config,
                              const std::shared_ptr<const UnknownLayout>& layout, const PeriodState& state,
                              std::span<const std::optional<PortVoltages>> previous_ports);

[[nodiscard]] Trace run(const Circuit& circuit, const SimConfig& config);
[[nodiscard]] Trace run(const Circuit& circuit);

/// Rebuilds the linear system of a recorded period (converged modes).
[[nodiscard]] LinearSystem assemble_period(const Circuit& circuit, const Trace& trace, std::size_t period);

}  // namespace cellsim
