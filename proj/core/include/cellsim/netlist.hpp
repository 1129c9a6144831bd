#pragma once

// =============================================================================
// Netlist - circuit description and its line-oriented text format
// =============================================================================
// One element per line, first letter selects the element type:
//
//   V<name> n+ n- <value>
//   I<name> n+ n- <value>
//   R<name> n1 n2 <value>
//   C<name> n+ n- <value> [IC=<volts>]
//   X<name> na np nc CELL KIND=<basic|flyback> SW=<syn|diode> L=<value>
//           D=<duty> [N=<ratio>] [IC=<amps>]
//   .FS <value>   .TRAN <value>   [.ORACLESTEPS <int>]   [.END]
//
// Lines starting with '*' or '#' are comments. Keywords are case-insensitive.
// Node "0" is ground.
// =============================================================================

#include <cstddef>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cellsim {

inline constexpr std::string_view kGroundNode = "0";
inline constexpr std::size_t kGround = std::numeric_limits<std::size_t>::max();

enum class CellKind { basic, flyback };
enum class SwitchType { synchronous, diode };

struct Resistor {
    std::string name;
    std::string n1;
    std::string n2;
    double ohms = 0.0;
    bool operator==(const Resistor&) const = default;
};

struct Capacitor {
    std::string name;
    std::string pos;
    std::string neg;
    double farads = 0.0;
    double initial_volts = 0.0;
    bool operator==(const Capacitor&) const = default;
};

struct VoltageSource {
    std::string name;
    std::string pos;
    std::string neg;
    double volts = 0.0;
    bool operator==(const VoltageSource&) const = default;
};

/// Positive value drives current from `pos` through the source to `neg`.
struct CurrentSource {
    std::string name;
    std::string pos;
    std::string neg;
    double amps = 0.0;
    bool operator==(const CurrentSource&) const = default;
};

/// Three-terminal switching cell. The inductor sits between an internal switch
/// node and `terminal_c`; the switch node is tied to `terminal_a` while the
/// active switch conducts and to `terminal_p` while the passive device does.
/// For the flyback kind `inductance` is the magnetizing inductance referred to
/// the primary and `turns_ratio` is secondary:primary.
struct SwitchingCellSpec {
    std::string name;
    std::string terminal_a;
    std::string terminal_p;
    std::string terminal_c;
    CellKind kind = CellKind::basic;
    SwitchType switch_type = SwitchType::synchronous;
    double inductance = 0.0;
    double turns_ratio = 1.0;
    double duty = 0.0;
    double initial_current = 0.0;
    bool operator==(const SwitchingCellSpec&) const = default;
};

struct SimDirectives {
    double switching_frequency = 0.0;
    double duration = 0.0;
    int oracle_substeps = 1000;

    [[nodiscard]] double period() const { return 1.0 / switching_frequency; }
    bool operator==(const SimDirectives&) const = default;
};

struct Circuit {
    /// Non-ground nodes, natural order (numeric names ascending, then the rest).
    std::vector<std::string> nodes;
    std::vector<Resistor> resistors;
    std::vector<Capacitor> capacitors;
    std::vector<VoltageSource> vsources;
    std::vector<CurrentSource> isources;
    std::vector<SwitchingCellSpec> cells;
    SimDirectives directives;

    /// Index into `nodes`, or kGround for "0". Throws std::out_of_range for
    /// unknown names.
    [[nodiscard]] std::size_t node_index(std::string_view node) const;

    bool operator==(const Circuit&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column);

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Decimal literal with optional SI suffix (f p n u m k meg g, any case).
/// Letters after the suffix are ignored ("10uH"). Throws std::invalid_argument.
[[nodiscard]] double parse_value(std::string_view token);

[[nodiscard]] Circuit parse_netlist(std::string_view text);

/// Reads and parses a netlist file; IoError when the file cannot be read.
[[nodiscard]] Circuit load_netlist(const std::filesystem::path& path);

/// Canonical text form; parse_netlist(to_netlist(c)) == c.
[[nodiscard]] std::string to_netlist(const Circuit& circuit);

/// Re-checks every circuit invariant (used after programmatic edits such as
/// command-line overrides). Throws std::invalid_argument.
void validate(const Circuit& circuit);

/// Natural ordering used for `Circuit::nodes`.
[[nodiscard]] bool node_less(std::string_view a, std::string_view b);

[[nodiscard]] std::string_view to_string(CellKind kind);
[[nodiscard]] std::string_view to_string(SwitchType type);

}  // namespace cellsim
