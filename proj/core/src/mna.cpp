#include "cellsim/mna.hpp"

#include <algorithm>

namespace cellsim {

UnknownLayout::UnknownLayout(const Circuit& circuit)
    : nodes_(circuit.nodes.size()),
      vsources_(circuit.vsources.size()),
      capacitors_(circuit.capacitors.size()),
      cells_(circuit.cells.size()) {
    labels_.reserve(nodes_ + branch_count() + extra_count());
    for (const auto& n : circuit.nodes) labels_.push_back("v(" + n + ")");
    for (const auto& v : circuit.vsources) labels_.push_back("i(" + v.name + ")");
    for (const auto& c : circuit.capacitors) labels_.push_back("i(" + c.name + ")");
    for (const auto& c : circuit.capacitors) labels_.push_back("vC(" + c.name + ")");
    for (const auto& x : circuit.cells) {
        for (const char* q : {"iS", "iD", "iL", "vL", "iL1", "iL2", "VL1", "VL2"}) {
            labels_.push_back(std::string(q) + "(" + x.name + ")");
        }
    }
}

CellSlots UnknownLayout::cell(std::size_t i) const {
    const std::size_t base = nodes_ + vsources_ + 2 * capacitors_ + kCellUnknowns * i;
    return {base, base + 1, base + 2, base + 3, base + 4, base + 5, base + 6, base + 7};
}

PeriodState PeriodState::initial(const Circuit& circuit) {
    PeriodState s;
    for (const auto& c : circuit.capacitors) {
        s.cap_voltage.push_back(c.initial_volts);
        s.cap_current.push_back(0.0);
    }
    for (const auto& x : circuit.cells) s.cell_current.push_back(x.initial_current);
    return s;
}

namespace {

// Adds `value` at (row, col) unless either index refers to ground.
struct Stamper {
    DenseMatrix& a;
    std::vector<double>& z;

    void add(std::size_t row, std::size_t col, double value) {
        if (row == kGround || col == kGround) return;
        a(row, col) += value;
    }
    void rhs(std::size_t row, double value) {
        if (row == kGround) return;
        z[row] += value;
    }
};

}  // namespace

LinearSystem assemble(const Circuit& circuit, std::shared_ptr<const UnknownLayout> layout,
                      const PeriodState& state, std::span<const ConductionMode> modes) {
    if (modes.size() != circuit.cells.size()) {
        throw std::invalid_argument("one conduction mode per cell is required");
    }
    if (state.cap_voltage.size() != circuit.capacitors.size() ||
        state.cap_current.size() != circuit.capacitors.size() ||
        state.cell_current.size() != circuit.cells.size()) {
        throw std::invalid_argument("period state does not match the circuit");
    }
    const auto& L = *layout;
    const std::size_t dim = L.size();
    LinearSystem sys{DenseMatrix(dim, dim), std::vector<double>(dim, 0.0), layout};
    Stamper st{sys.a, sys.z};
    const double period = circuit.directives.period();

    for (const auto& r : circuit.resistors) {
        const std::size_t n1 = circuit.node_index(r.n1);
        const std::size_t n2 = circuit.node_index(r.n2);
        const double g = 1.0 / r.ohms;
        st.add(n1, n1, g);
        st.add(n2, n2, g);
        st.add(n1, n2, -g);
        st.add(n2, n1, -g);
    }

    for (const auto& s : circuit.isources) {
        st.rhs(circuit.node_index(s.pos), -s.amps);
        st.rhs(circuit.node_index(s.neg), s.amps);
    }

    for (std::size_t i = 0; i < circuit.vsources.size(); ++i) {
        const auto& v = circuit.vsources[i];
        const std::size_t np = circuit.node_index(v.pos);
        const std::size_t nn = circuit.node_index(v.neg);
        const std::size_t br = L.vsource_current(i);
        st.add(np, br, 1.0);
        st.add(nn, br, -1.0);
        st.add(br, np, 1.0);
        st.add(br, nn, -1.0);
        st.rhs(br, v.volts);
    }

    for (std::size_t i = 0; i < circuit.capacitors.size(); ++i) {
        const auto& c = circuit.capacitors[i];
        const std::size_t np = circuit.node_index(c.pos);
        const std::size_t nn = circuit.node_index(c.neg);
        const std::size_t br = L.capacitor_current(i);
        const std::size_t vc = L.capacitor_voltage(i);
        const double rc = period / (2.0 * c.farads);
        st.add(np, br, 1.0);
        st.add(nn, br, -1.0);
        st.add(br, np, 1.0);
        st.add(br, nn, -1.0);
        st.add(br, vc, -1.0);
        st.add(vc, vc, 1.0);
        st.add(vc, br, -rc);
        st.rhs(vc, state.cap_voltage[i] + rc * state.cap_current[i]);
    }

    for (std::size_t i = 0; i < circuit.cells.size(); ++i) {
        const auto& x = circuit.cells[i];
        const CellSlots s = L.cell(i);
        const std::size_t na = circuit.node_index(x.terminal_a);
        const std::size_t np = circuit.node_index(x.terminal_p);
        const std::size_t nc = circuit.node_index(x.terminal_c);
        const double d = x.duty;
        const double dp = modes[i].passive_duty;
        const double gl = period / x.inductance;
        const double i0 = state.cell_current[i];

        // Terminal currents (leaving the node, into the cell).
        st.add(na, s.avg_switch, 1.0);
        if (x.kind == CellKind::basic) {
            st.add(np, s.avg_diode, 1.0);
            st.add(nc, s.avg_inductor, -1.0);
        } else {
            const double n = x.turns_ratio;
            st.add(np, s.avg_diode, -1.0 / n);
            st.add(nc, s.avg_switch, -1.0);
            st.add(nc, s.avg_diode, 1.0 / n);
        }

        st.add(s.avg_switch, s.avg_switch, 1.0);
        st.add(s.avg_switch, s.i_switch, -0.5 * d);
        st.rhs(s.avg_switch, 0.5 * d * i0);

        st.add(s.avg_diode, s.avg_diode, 1.0);
        st.add(s.avg_diode, s.i_switch, -0.5 * dp);
        st.add(s.avg_diode, s.i_end, -0.5 * dp);

        st.add(s.avg_inductor, s.avg_inductor, 1.0);
        st.add(s.avg_inductor, s.avg_switch, -1.0);
        st.add(s.avg_inductor, s.avg_diode, -1.0);

        st.add(s.avg_inductor_voltage, s.avg_inductor_voltage, 1.0);
        st.add(s.avg_inductor_voltage, s.on_voltage, -d);
        st.add(s.avg_inductor_voltage, s.off_voltage, -dp);

        st.add(s.i_switch, s.i_switch, 1.0);
        st.add(s.i_switch, s.on_voltage, -gl * d);
        st.rhs(s.i_switch, i0);

        st.add(s.i_end, s.i_end, 1.0);
        st.add(s.i_end, s.i_switch, -1.0);
        st.add(s.i_end, s.off_voltage, -gl * dp);

        st.add(s.on_voltage, s.on_voltage, 1.0);
        st.add(s.on_voltage, na, -1.0);
        st.add(s.on_voltage, nc, 1.0);

        st.add(s.off_voltage, s.off_voltage, 1.0);
        if (x.kind == CellKind::basic) {
            st.add(s.off_voltage, np, -1.0);
            st.add(s.off_voltage, nc, 1.0);
        } else {
            const double n = x.turns_ratio;
            st.add(s.off_voltage, np, 1.0 / n);
            st.add(s.off_voltage, nc, -1.0 / n);
        }
    }
    return sys;
}

LinearSystem assemble(const Circuit& circuit, const PeriodState& state, std::span<const ConductionMode> modes) {
    return assemble(circuit, std::make_shared<const UnknownLayout>(circuit), state, modes);
}

std::vector<double> solve(const LinearSystem& system, std::size_t period) {
    try {
        const LuFactorization lu(system.a);
        auto x = lu.solve(system.z);
        // One refinement pass keeps the residual at roundoff level for the
        // mixed-scale rows (conductances next to unit coefficients).
        const auto ax = system.a.multiply(x);
        std::vector<double> r(ax.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = system.z[i] - ax[i];
        const auto dx = lu.solve(r);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
        return x;
    } catch (const SingularMatrixError& e) {
        std::string where = "unknown";
        if (system.layout && e.pivot_row() < system.layout->size()) {
            where = system.layout->labels()[e.pivot_row()];
        }
        throw NumericalError("singular system in period " + std::to_string(period) + " (pivot " +
                                 std::to_string(e.pivot_row()) + ", near " + where + ")",
                             period);
    }
}

CellStepSolution decode_cell(const UnknownLayout& layout, std::span<const double> x, std::size_t cell,
                             double i_start, double duty, const ConductionMode& mode) {
    const CellSlots s = layout.cell(cell);
    CellStepSolution out;
    out.i_start = i_start;
    out.i_switch = x[s.i_switch];
    out.i_end = x[s.i_end];
    out.avg_switch = x[s.avg_switch];
    out.avg_diode = x[s.avg_diode];
    out.avg_inductor = x[s.avg_inductor];
    out.avg_inductor_voltage = x[s.avg_inductor_voltage];
    out.on_voltage = x[s.on_voltage];
    out.off_voltage = x[s.off_voltage];
    out.duty = duty;
    out.mode = mode;
    return out;
}

}  // namespace cellsim
