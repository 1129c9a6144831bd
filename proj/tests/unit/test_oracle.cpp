#include <catch_amalgamated.hpp>

#include <cmath>

#include "cellsim/oracle.hpp"
#include "test_support.hpp"

using namespace cellsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SwitchedTrace simulate(const Circuit& c, int substeps = 1000, double duration = 0.0, bool samples = true) {
    SimConfig cfg = SimConfig::from_circuit(c);
    if (duration > 0.0) cfg.duration = duration;
    return simulate_switched(c, cfg, {substeps, samples});
}

PeriodSeries series_of(const Circuit& c, const SwitchedTrace& tr) {
    const auto names = compared_signals(c);
    return period_series(tr, names);
}

}  // namespace

TEST_CASE("substep floor is enforced", "[oracle][errors]") {
    const Circuit c = testing::buck();
    CHECK_THROWS_AS(simulate(c, 10), std::invalid_argument);
    CHECK_THROWS_AS(simulate(c, kMinOracleSubsteps - 1), std::invalid_argument);
    CHECK_NOTHROW(simulate(c, kMinOracleSubsteps, 2e-5));
}

TEST_CASE("resistive network stays at its DC solution", "[oracle]") {
    const Circuit c = parse_netlist("V1 1 0 12\nR1 1 2 1k\nR2 2 0 2k\nI1 2 0 1m\n.FS 1k\n.TRAN 3m\n");
    const auto tr = simulate(c, 100);
    REQUIRE(tr.periods.size() == 3);
    const auto v2 = tr.signal_index("v(2)");
    REQUIRE(tr.sample_count() > 300);
    for (std::size_t k = 0; k < tr.sample_count(); ++k) {
        REQUIRE_THAT(tr.sample(k)[v2], WithinRel(22.0 / 3.0, 1e-12));
        REQUIRE_THAT(tr.sample(k)[0], WithinRel(12.0, 1e-12));
    }
    const auto& p = tr.periods.back();
    CHECK_THAT(p.input_power, WithinRel(p.dissipated_power + p.delivered_power, 1e-12));
}

TEST_CASE("single-period inductor ramp against a held output", "[oracle]") {
    // A very large capacitor holds the output at zero for one period.
    const Circuit c = parse_netlist(
        "VIN 1 0 10\nX1 1 0 2 CELL KIND=basic SW=syn L=10u D=0.5\nC1 2 0 1k\n.FS 100k\n.TRAN 10u\n");
    const auto tr = simulate(c);
    REQUIRE(tr.periods.size() == 1);
    const auto il = tr.cell_current_signal(0);
    double at_switch = std::nan("");
    for (std::size_t k = 0; k < tr.sample_count(); ++k) {
        if (tr.sample_t[k] == 5e-6) {
            at_switch = tr.sample(k)[il];
            break;
        }
    }
    CHECK_THAT(at_switch, WithinRel(5.0, 1e-6));
    // With the output held at zero the freewheeling interval sees no voltage.
    CHECK_THAT(tr.sample(tr.sample_count() - 1)[il], WithinRel(5.0, 1e-6));
}

TEST_CASE("synchronous buck oracle settles at 5 V / 5 A", "[oracle][example]") {
    const Circuit c = testing::load_example("buck_syn.cir");
    const auto tr = simulate(c, 1000, 20e-3, false);
    const auto s = series_of(c, tr);
    const auto last = s.period_count() - 1;
    CHECK_THAT(s.values[1][last], WithinRel(5.0, 1e-3));  // v(2)
    CHECK_THAT(s.values[2][last], WithinRel(5.0, 1e-3));  // iL(X1)
}

TEST_CASE("oracle compared against itself has zero error", "[oracle][compare]") {
    const Circuit c = testing::load_example("buck_diode.cir");
    const auto s = series_of(c, simulate(c, 200, 1e-3, false));
    const auto r = compare(s, s, 0.2);
    CHECK(r.max_error() == 0.0);
    CHECK(r.first_retained == 20);
    CHECK(r.within(0.0));
}

TEST_CASE("doubling substeps changes period averages by at most 1e-4", "[oracle][convergence]") {
    for (const char* name : {"buck_syn.cir", "buck_diode.cir", "flyback_syn.cir", "flyback_diode.cir"}) {
        INFO(name);
        const Circuit c = testing::load_example(name);
        const auto coarse = series_of(c, simulate(c, 1000, 0.0, false));
        const auto fine = series_of(c, simulate(c, 2000, 0.0, false));
        const auto r = compare(coarse, fine, 0.0);
        for (const auto& sig : r.signals) {
            INFO(sig.name << " worst period " << sig.worst_period);
            CHECK(sig.max_error <= 1e-4);
        }
    }
}

TEST_CASE("an open diode carries exactly zero current", "[oracle][dcm]") {
    const Circuit c = testing::load_example("buck_diode.cir");
    const auto tr = simulate(c, 1000, 1e-3);
    const auto il = tr.cell_current_signal(0);
    const double T = tr.period;
    std::size_t opened = 0;
    std::size_t checked = 0;
    std::size_t k = 0;
    for (const auto& p : tr.periods) {
        if (!p.diode_opened[0]) continue;
        ++opened;
        const double t_event = p.t_start + p.conduction_fraction[0] * T;
        const double t_end = p.t_start + T;
        CHECK(p.conduction_fraction[0] < 1.0);
        while (k < tr.sample_count() && tr.sample_t[k] <= t_event) ++k;
        for (; k < tr.sample_count() && tr.sample_t[k] < t_end; ++k) {
            REQUIRE(tr.sample(k)[il] == 0.0);
            ++checked;
        }
    }
    CHECK(opened > 0);
    CHECK(checked > 0);
    for (std::size_t j = 0; j < tr.sample_count(); ++j) REQUIRE(tr.sample(j)[il] >= -1e-9);
}

TEST_CASE("steady-state power balance", "[oracle][energy]") {
    for (const char* name : {"buck_syn.cir", "buck_diode.cir", "flyback_diode.cir"}) {
        INFO(name);
        const Circuit c = testing::load_example(name);
        const auto tr = simulate(c, 1000, 20e-3, false);
        double in = 0.0;
        double out = 0.0;
        const std::size_t n = tr.periods.size() / 10;
        for (std::size_t i = tr.periods.size() - n; i < tr.periods.size(); ++i) {
            const auto& p = tr.periods[i];
            in += p.input_power;
            out += p.dissipated_power + p.delivered_power + p.stored_energy_change / tr.period;
        }
        CHECK_THAT(out, WithinRel(in, 5e-3));
    }
}

TEST_CASE("compare rejects mismatched inputs", "[oracle][compare][errors]") {
    const Circuit c = testing::buck();
    const auto a = series_of(c, simulate(c, 100, 1e-4, false));
    const auto longer = series_of(c, simulate(c, 100, 2e-4, false));
    CHECK_THROWS_AS(compare(a, longer, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(compare(a, a, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(compare(a, a, -0.1), std::invalid_argument);
    PeriodSeries renamed = a;
    renamed.names[0] = "v(9)";
    CHECK_THROWS_AS(compare(a, renamed, 0.2), std::invalid_argument);
}

TEST_CASE("normalization uses the final reference value and a unit floor", "[oracle][compare]") {
    PeriodSeries ref{1e-5, {"v(2)", "iL(X1)"}, {{1.0, 2.0, 4.0, 5.0}, {0.0, 0.0, 0.01, 0.02}}};
    PeriodSeries cand = ref;
    cand.values[0][3] = 5.1;   // 0.1 / 5
    cand.values[1][2] = 0.03;  // 0.02 / floor 0.1
    cand.values[0][0] = 3.0;   // skipped startup period
    const auto r = compare(cand, ref, 0.25);
    REQUIRE(r.first_retained == 1);
    CHECK_THAT(r.signals[0].max_error, WithinRel(0.02, 1e-12));
    CHECK(r.signals[0].worst_period == 3);
    CHECK_THAT(r.signals[0].startup_error, WithinRel(0.4, 1e-12));
    CHECK_THAT(r.signals[1].max_error, WithinRel(0.2, 1e-12));
    CHECK_THAT(r.max_error(), WithinRel(0.2, 1e-12));
    CHECK(normalization_floor("v(2)") == 0.1);
    CHECK(normalization_floor("iL(X1)") == 0.1);
}

TEST_CASE("averaged and switched series share signal names", "[oracle][compare]") {
    const Circuit c = testing::load_example("buck_syn.cir");
    CHECK(compared_signals(c) == std::vector<std::string>{"v(1)", "v(2)", "iL(X1)", "vC(C1)"});
    SimConfig cfg = SimConfig::from_circuit(c);
    cfg.duration = 1e-3;
    const auto avg = period_series(run(c, cfg), compared_signals(c));
    const auto sw = series_of(c, simulate_switched(c, cfg, {1000, false}));
    const auto r = compare(avg, sw, 0.2);
    CHECK(r.signals.size() == 4);
    CHECK(r.signals[0].max_error < 1e-12);  // v(1) is the source voltage in both
}
