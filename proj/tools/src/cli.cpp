#include "cellsim_cli/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellsim/engine.hpp"
#include "cellsim/netlist.hpp"
#include "cellsim/oracle.hpp"
#include "cellsim/report.hpp"
#include "cellsim/waveforms.hpp"

namespace cellsim::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string netlist;
    std::string duration;
    std::string fs;
    std::vector<std::string> duties;
    std::string avg_out;
    std::string wave_out;
    std::string svg;
    double stats_window = 0.1;
};

struct RunOptions {
    std::optional<std::size_t> dump_period;
    std::string dump_out = "system_dump.csv";
};

struct OracleFlags {
    std::optional<int> substeps;
};

struct CompareOptions {
    double tol = 0.02;
    double skip = 0.2;
};

void add_common(CLI::App& cmd, CommonOptions& o, bool outputs) {
    cmd.add_option("netlist", o.netlist, "Netlist file")->required();
    cmd.add_option("--duration", o.duration, "Override .TRAN (seconds, SI suffixes allowed)");
    cmd.add_option("--fs", o.fs, "Override .FS (hertz, SI suffixes allowed)");
    cmd.add_option("--duty", o.duties, "Override a cell duty, <cell>=<d>");
    cmd.add_option("--avg-out", o.avg_out, "Per-period CSV output");
    if (outputs) {
        cmd.add_option("--wave-out", o.wave_out, "Instantaneous waveform CSV output");
        cmd.add_option("--svg", o.svg, "SVG plot of inductor currents and capacitor voltages");
        cmd.add_option("--stats-window", o.stats_window, "Trailing fraction of the run for statistics")
            ->check(CLI::Range(0.0, 1.0));
    }
}

double parse_override(const std::string& text, const char* what) {
    try {
        return parse_value(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("invalid ") + what + " '" + text + "': " + e.what());
    }
}

Circuit load(const CommonOptions& o) {
    Circuit c = load_netlist(o.netlist);
    if (!o.duration.empty()) c.directives.duration = parse_override(o.duration, "--duration");
    if (!o.fs.empty()) c.directives.switching_frequency = parse_override(o.fs, "--fs");
    for (const auto& spec : o.duties) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw UsageError("--duty expects <cell>=<d>, got '" + spec + "'");
        const std::string name = spec.substr(0, eq);
        auto it = std::find_if(c.cells.begin(), c.cells.end(), [&](const auto& x) { return x.name == name; });
        if (it == c.cells.end()) throw UsageError("--duty: no cell named '" + name + "'");
        it->duty = parse_override(spec.substr(eq + 1), "--duty");
    }
    try {
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

void finish_output(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw IoError("failed writing '" + path + "'");
}

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
    auto f = open_output(path);
    fn(f);
    finish_output(f, path);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void print_stats(std::ostream& out, std::span<const NamedWaveform> waves, double fraction) {
    if (waves.empty() || waves.front().waveform.size() < 2) return;
    const auto window = tail_window(waves.front().waveform, fraction);
    out << "statistics over t = [" << format_number(window.start) << ", " << format_number(window.end) << "] s\n";
    write_stats(out, waves, window);
}

int cmd_run(const CommonOptions& o, const RunOptions& r, std::ostream& out) {
    const Circuit circuit = load(o);
    const SimConfig config = SimConfig::from_circuit(circuit);
    const auto t0 = std::chrono::steady_clock::now();
    const Trace trace = run(circuit, config);
    const double ms = elapsed_ms(t0);
    out << "averaged: " << trace.periods.size() << " periods in " << format_number(ms) << " ms\n";
    for (const auto& w : trace.warnings) out << "warning: " << w << '\n';
    if (trace.suppressed_warnings) out << "warning: " << trace.suppressed_warnings << " more suppressed\n";

    const auto waves = reconstruct_all(circuit, trace);
    print_stats(out, waves, o.stats_window);

    if (!o.avg_out.empty()) write_file(o.avg_out, [&](std::ostream& f) { write_period_csv(f, circuit, trace); });
    if (!o.wave_out.empty()) write_file(o.wave_out, [&](std::ostream& f) { write_waveform_csv(f, "avg", waves); });
    if (!o.svg.empty()) {
        write_file(o.svg, [&](std::ostream& f) { write_svg(f, waves, "averaged: " + o.netlist); });
    }
    if (r.dump_period) {
        if (*r.dump_period >= trace.periods.size()) {
            throw UsageError("--dump-system period " + std::to_string(*r.dump_period) + " outside 0.." +
                             std::to_string(trace.periods.size() - 1));
        }
        const auto sys = assemble_period(circuit, trace, *r.dump_period);
        write_file(r.dump_out, [&](std::ostream& f) {
            write_system_csv(f, sys, trace.periods[*r.dump_period].x);
        });
    }
    return kOk;
}

int substeps_for(const Circuit& circuit, const OracleFlags& flags) {
    const int n = flags.substeps.value_or(circuit.directives.oracle_substeps);
    if (n < kMinOracleSubsteps) {
        throw UsageError("--substeps must be at least " + std::to_string(kMinOracleSubsteps));
    }
    return n;
}

int cmd_oracle(const CommonOptions& o, const OracleFlags& flags, std::ostream& out) {
    const Circuit circuit = load(o);
    const SimConfig config = SimConfig::from_circuit(circuit);
    const int substeps = substeps_for(circuit, flags);
    const auto t0 = std::chrono::steady_clock::now();
    const SwitchedTrace trace = simulate_switched(circuit, config, {substeps, true});
    const double ms = elapsed_ms(t0);
    out << "oracle: " << trace.periods.size() << " periods, " << substeps << " substeps in " << format_number(ms)
        << " ms\n";

    const auto waves = sampled_waveforms(trace);
    print_stats(out, waves, o.stats_window);

    if (!o.avg_out.empty()) write_file(o.avg_out, [&](std::ostream& f) { write_period_csv(f, circuit, trace); });
    if (!o.wave_out.empty()) write_file(o.wave_out, [&](std::ostream& f) { write_sample_csv(f, trace); });
    if (!o.svg.empty()) {
        write_file(o.svg, [&](std::ostream& f) { write_svg(f, waves, "oracle: " + o.netlist); });
    }
    return kOk;
}

int cmd_compare(const CommonOptions& o, const OracleFlags& flags, const CompareOptions& c, std::ostream& out) {
    const Circuit circuit = load(o);
    const SimConfig config = SimConfig::from_circuit(circuit);
    const int substeps = substeps_for(circuit, flags);
    if (!(c.skip >= 0.0 && c.skip < 0.5)) throw UsageError("--skip must lie in [0, 0.5)");
    if (!(c.tol >= 0.0)) throw UsageError("--tol must be non-negative");

    const auto t0 = std::chrono::steady_clock::now();
    const Trace avg = run(circuit, config);
    const double avg_ms = elapsed_ms(t0);
    const auto t1 = std::chrono::steady_clock::now();
    const SwitchedTrace sw = simulate_switched(circuit, config, {substeps, false});
    const double sw_ms = elapsed_ms(t1);
    out << "averaged: " << avg.periods.size() << " periods in " << format_number(avg_ms) << " ms\n";
    out << "oracle: " << sw.periods.size() << " periods, " << substeps << " substeps in " << format_number(sw_ms)
        << " ms\n";

    const auto names = compared_signals(circuit);
    const auto report = compare(period_series(avg, names), period_series(sw, names), c.skip);
    write_error_report(out, report, c.tol);

    if (!o.avg_out.empty()) {
        write_file(o.avg_out, [&](std::ostream& f) {
            write_period_csv(f, circuit, avg);
            write_period_csv(f, circuit, sw);
        });
    }
    return report.within(c.tol) ? kOk : kToleranceExceeded;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Switching-period averaged simulator for PWM DC-DC converters", "cellsim"};
    app.require_subcommand(1);

    CommonOptions common;
    RunOptions run_opts;
    OracleFlags oracle_flags;
    CompareOptions compare_opts;

    auto* run_cmd = app.add_subcommand("run", "Averaged simulation");
    add_common(*run_cmd, common, true);
    std::size_t dump_period = 0;
    auto* dump_flag = run_cmd->add_option("--dump-system", dump_period, "Write A, x, z of one period as CSV");
    run_cmd->add_option("--dump-out", run_opts.dump_out, "Output path for --dump-system");

    auto* oracle_cmd = app.add_subcommand("oracle", "Switched-state reference simulation");
    add_common(*oracle_cmd, common, true);
    int substeps = 0;
    auto* oracle_steps = oracle_cmd->add_option("--substeps", substeps, "Time steps per switching period");

    auto* compare_cmd = app.add_subcommand("compare", "Averaged vs switched per-period error report");
    add_common(*compare_cmd, common, false);
    int compare_substeps = 0;
    auto* compare_steps = compare_cmd->add_option("--substeps", compare_substeps, "Oracle time steps per period");
    compare_cmd->add_option("--tol", compare_opts.tol, "Maximum normalized error for exit code 0");
    compare_cmd->add_option("--skip", compare_opts.skip, "Leading fraction of periods excluded");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << '\n';
            return kOk;
        }
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (*run_cmd) {
            if (dump_flag->count()) run_opts.dump_period = dump_period;
            return cmd_run(common, run_opts, out);
        }
        if (*oracle_cmd) {
            if (oracle_steps->count()) oracle_flags.substeps = substeps;
            return cmd_oracle(common, oracle_flags, out);
        }
        if (compare_steps->count()) oracle_flags.substeps = compare_substeps;
        return cmd_compare(common, oracle_flags, compare_opts, out);
    } catch (const ParseError& e) {
        err << "error: " << common.netlist << ": " << e.what() << '\n';
        return kUsageError;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
}

}  // namespace cellsim::cli
