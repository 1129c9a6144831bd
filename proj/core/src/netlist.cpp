#include "cellsim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cellsim/report.hpp"

namespace cellsim {

namespace {

struct Token {
    std::string_view text;
    std::size_t column = 0;  // 1-based
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(),
                                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

// Node/element bookkeeping for diagnostics that are only detectable once the
// whole file has been read.
struct Origins {
    std::map<std::string, std::size_t> node_line;  // first line mentioning a node
    std::size_t last_line = 0;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Circuit run() {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        bool ended = false;
        while (pos <= text_.size() && !ended) {
            std::size_t eol = text_.find('\n', pos);
            if (eol == std::string_view::npos) eol = text_.size();
            std::string_view line = text_.substr(pos, eol - pos);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            ++line_no;
            line_ = line_no;
            ended = parse_line(line);
            pos = eol + 1;
        }
        origins_.last_line = std::max<std::size_t>(line_no, 1);
        finish();
        return std::move(circuit_);
    }

private:
    [[noreturn]] void fail(const std::string& message, std::size_t column) const {
        throw ParseError(message, line_, column);
    }

    double value(const Token& tok) const {
        try {
            return parse_value(tok.text);
        } catch (const std::invalid_argument& e) {
            fail(e.what(), tok.column);
        }
    }

    double positive(const Token& tok, std::string_view what) const {
        const double v = value(tok);
        if (!(v > 0.0)) fail(std::string(what) + " must be positive", tok.column);
        return v;
    }

    std::string node(const Token& tok) {
        std::string name(tok.text);
        origins_.node_line.try_emplace(name, line_);
        return name;
    }

    void claim_name(const Token& tok) {
        const std::string key = lower(tok.text);
        if (!names_.insert(key).second) {
            fail("duplicate element name '" + std::string(tok.text) + "'", tok.column);
        }
    }

    void expect_count(const std::vector<Token>& toks, std::size_t min_count,
                      std::string_view usage) const {
        if (toks.size() < min_count) {
            const std::size_t col = toks.back().column + toks.back().text.size();
            fail("expected: " + std::string(usage), col);
        }
    }

    void distinct_terminals(const Token& a, const Token& b) const {
        if (a.text == b.text) fail("element terminals must be distinct nodes", b.column);
    }

    // Returns true on .END
    bool parse_line(std::string_view line) {
        const auto toks = tokenize(line);
        if (toks.empty()) return false;
        const char lead = toks[0].text[0];
        if (lead == '*' || lead == '#') return false;
        if (lead == '.') return parse_directive(toks);

        switch (std::toupper(static_cast<unsigned char>(lead))) {
            case 'R': parse_resistor(toks); break;
            case 'C': parse_capacitor(toks); break;
            case 'V': parse_vsource(toks); break;
            case 'I': parse_isource(toks); break;
            case 'X': parse_cell(toks); break;
            default:
                fail("unknown element prefix '" + std::string(1, lead) + "'", toks[0].column);
        }
        return false;
    }

    bool parse_directive(const std::vector<Token>& toks) {
        const std::string key = lower(toks[0].text);
        if (key == ".end") return true;
        if (key == ".fs") {
            expect_count(toks, 2, ".FS <frequency>");
            circuit_.directives.switching_frequency = positive(toks[1], "switching frequency");
            seen_fs_ = true;
        } else if (key == ".tran") {
            expect_count(toks, 2, ".TRAN <duration>");
            circuit_.directives.duration = positive(toks[1], "duration");
            seen_tran_ = true;
            tran_line_ = line_;
        } else if (key == ".oraclesteps") {
            expect_count(toks, 2, ".ORACLESTEPS <int>");
            int steps = 0;
            const auto text = toks[1].text;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), steps);
            if (ec != std::errc{} || ptr != text.data() + text.size() || steps <= 0) {
                fail("oracle steps must be a positive integer", toks[1].column);
            }
            circuit_.directives.oracle_substeps = steps;
        } else {
            fail("unknown directive '" + std::string(toks[0].text) + "'", toks[0].column);
        }
        if (toks.size() > 2) fail("unexpected token", toks[2].column);
        return false;
    }

    void parse_resistor(const std::vector<Token>& toks) {
        expect_count(toks, 4, "R<name> n1 n2 <ohms>");
        claim_name(toks[0]);
        distinct_terminals(toks[1], toks[2]);
        Resistor r{std::string(toks[0].text), node(toks[1]), node(toks[2]),
                   positive(toks[3], "resistance")};
        if (toks.size() > 4) fail("unexpected token", toks[4].column);
        circuit_.resistors.push_back(std::move(r));
    }

    void parse_capacitor(const std::vector<Token>& toks) {
        expect_count(toks, 4, "C<name> n+ n- <farads> [IC=<volts>]");
        claim_name(toks[0]);
        distinct_terminals(toks[1], toks[2]);
        Capacitor c{std::string(toks[0].text), node(toks[1]), node(toks[2]),
                    positive(toks[3], "capacitance"), 0.0};
        for (std::size_t i = 4; i < toks.size(); ++i) {
            const auto [key, val] = split_param(toks[i]);
            if (key != "ic") fail("unknown capacitor parameter '" + key + "'", toks[i].column);
            c.initial_volts = value(val);
        }
        circuit_.capacitors.push_back(std::move(c));
    }

    void parse_vsource(const std::vector<Token>& toks) {
        expect_count(toks, 4, "V<name> n+ n- <volts>");
        claim_name(toks[0]);
        distinct_terminals(toks[1], toks[2]);
        VoltageSource v{std::string(toks[0].text), node(toks[1]), node(toks[2]), value(toks[3])};
        if (toks.size() > 4) fail("unexpected token", toks[4].column);
        circuit_.vsources.push_back(std::move(v));
    }

    void parse_isource(const std::vector<Token>& toks) {
        expect_count(toks, 4, "I<name> n+ n- <amps>");
        claim_name(toks[0]);
        distinct_terminals(toks[1], toks[2]);
        CurrentSource s{std::string(toks[0].text), node(toks[1]), node(toks[2]), value(toks[3])};
        if (toks.size() > 4) fail("unexpected token", toks[4].column);
        circuit_.isources.push_back(std::move(s));
    }

    std::pair<std::string, Token> split_param(const Token& tok) const {
        const auto eq = tok.text.find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == tok.text.size()) {
            fail("expected KEY=VALUE, got '" + std::string(tok.text) + "'", tok.column);
        }
        return {lower(tok.text.substr(0, eq)), Token{tok.text.substr(eq + 1), tok.column + eq + 1}};
    }

    void parse_cell(const std::vector<Token>& toks) {
        constexpr std::string_view usage =
            "X<name> na np nc CELL KIND=<basic|flyback> SW=<syn|diode> L=<value> D=<duty>";
        expect_count(toks, 5, usage);
        claim_name(toks[0]);
        if (!iequals(toks[4].text, "cell")) fail("expected CELL keyword", toks[4].column);
        distinct_terminals(toks[1], toks[3]);
        distinct_terminals(toks[2], toks[3]);
        distinct_terminals(toks[1], toks[2]);

        SwitchingCellSpec cell;
        cell.name = std::string(toks[0].text);
        cell.terminal_a = node(toks[1]);
        cell.terminal_p = node(toks[2]);
        cell.terminal_c = node(toks[3]);

        std::optional<double> inductance, duty, ratio, ic;
        std::size_t ic_column = 0;
        for (std::size_t i = 5; i < toks.size(); ++i) {
            const auto [key, val] = split_param(toks[i]);
            if (key == "kind") {
                if (iequals(val.text, "basic")) cell.kind = CellKind::basic;
                else if (iequals(val.text, "flyback")) cell.kind = CellKind::flyback;
                else fail("KIND must be basic or flyback", val.column);
            } else if (key == "sw") {
                if (iequals(val.text, "syn")) cell.switch_type = SwitchType::synchronous;
                else if (iequals(val.text, "diode")) cell.switch_type = SwitchType::diode;
                else fail("SW must be syn or diode", val.column);
            } else if (key == "l") {
                inductance = positive(val, "inductance");
            } else if (key == "d") {
                duty = value(val);
                if (!(*duty > 0.0 && *duty < 1.0)) fail("duty must lie in (0, 1)", val.column);
            } else if (key == "n") {
                ratio = positive(val, "turns ratio");
            } else if (key == "ic") {
                ic = value(val);
                ic_column = val.column;
            } else {
                fail("unknown cell parameter '" + key + "'", toks[i].column);
            }
        }
        const std::size_t end_col = toks.back().column + toks.back().text.size();
        if (!inductance) fail("missing required cell parameter L", end_col);
        if (!duty) fail("missing required cell parameter D", end_col);
        cell.inductance = *inductance;
        cell.duty = *duty;
        if (cell.kind == CellKind::flyback) {
            if (!ratio) fail("missing required cell parameter N for flyback cell", end_col);
            cell.turns_ratio = *ratio;
        }
        if (ic) {
            if (cell.switch_type == SwitchType::diode && *ic < 0.0) {
                fail("diode cell initial current must be non-negative", ic_column);
            }
            cell.initial_current = *ic;
        }
        circuit_.cells.push_back(std::move(cell));
    }

    void finish() {
        line_ = origins_.last_line;
        if (!origins_.node_line.contains(std::string(kGroundNode))) {
            fail("missing ground node", 1);
        }
        for (const auto& [name, line] : origins_.node_line) {
            if (name != kGroundNode) circuit_.nodes.push_back(name);
        }
        std::sort(circuit_.nodes.begin(), circuit_.nodes.end(),
                  [](const std::string& a, const std::string& b) { return node_less(a, b); });
        if (!seen_fs_) fail("missing .FS directive", 1);
        if (!seen_tran_) fail("missing .TRAN directive", 1);

        try {
            validate(circuit_);
        } catch (const std::invalid_argument& e) {
            // Map structural problems back to the line that introduced them.
            std::size_t line = origins_.last_line;
            const std::string msg = e.what();
            if (msg.find("duration") != std::string::npos && seen_tran_) line = tran_line_;
            const auto quote = msg.find('\'');
            if (quote != std::string::npos) {
                const auto close = msg.find('\'', quote + 1);
                const auto it = origins_.node_line.find(msg.substr(quote + 1, close - quote - 1));
                if (it != origins_.node_line.end()) line = it->second;
            }
            throw ParseError(msg, line, 1);
        }
    }

    std::string_view text_;
    std::size_t line_ = 0;
    Circuit circuit_;
    Origins origins_;
    std::set<std::string> names_;
    bool seen_fs_ = false;
    bool seen_tran_ = false;
    std::size_t tran_line_ = 0;
};

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

std::size_t Circuit::node_index(std::string_view node) const {
    if (node == kGroundNode) return kGround;
    const auto it = std::find(nodes.begin(), nodes.end(), node);
    if (it == nodes.end()) throw std::out_of_range("unknown node '" + std::string(node) + "'");
    return static_cast<std::size_t>(it - nodes.begin());
}

bool node_less(std::string_view a, std::string_view b) {
    const bool da = all_digits(a);
    const bool db = all_digits(b);
    if (da && db) {
        const auto strip = [](std::string_view s) {
            const auto nz = s.find_first_not_of('0');
            return nz == std::string_view::npos ? std::string_view{} : s.substr(nz);
        };
        const auto sa = strip(a);
        const auto sb = strip(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
        return a < b;
    }
    if (da != db) return da;
    return a < b;
}

double parse_value(std::string_view token) {
    if (token.empty()) throw std::invalid_argument("empty value");
    std::string_view rest = token;
    bool negative = false;
    if (rest.front() == '+' || rest.front() == '-') {
        negative = rest.front() == '-';
        rest.remove_prefix(1);
    }
    if (rest.empty() || !(std::isdigit(static_cast<unsigned char>(rest.front())) || rest.front() == '.')) {
        throw std::invalid_argument("malformed number '" + std::string(token) + "'");
    }
    double magnitude = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), magnitude,
                                           std::chars_format::general);
    if (ec != std::errc{} || !std::isfinite(magnitude)) {
        throw std::invalid_argument("malformed number '" + std::string(token) + "'");
    }
    std::string suffix = lower(rest.substr(static_cast<std::size_t>(ptr - rest.data())));

    double scale = 1.0;
    std::size_t used = 0;
    if (suffix.starts_with("meg")) {
        scale = 1e6;
        used = 3;
    } else if (!suffix.empty()) {
        switch (suffix.front()) {
            case 'f': scale = 1e-15; break;
            case 'p': scale = 1e-12; break;
            case 'n': scale = 1e-9; break;
            case 'u': scale = 1e-6; break;
            case 'm': scale = 1e-3; break;
            case 'k': scale = 1e3; break;
            case 'g': scale = 1e9; break;
            default:
                if (std::isalpha(static_cast<unsigned char>(suffix.front()))) {
                    throw std::invalid_argument("unknown suffix in '" + std::string(token) + "'");
                }
                throw std::invalid_argument("malformed number '" + std::string(token) + "'");
        }
        used = 1;
    }
    for (std::size_t i = used; i < suffix.size(); ++i) {
        if (!std::isalpha(static_cast<unsigned char>(suffix[i]))) {
            throw std::invalid_argument("malformed number '" + std::string(token) + "'");
        }
    }
    const double v = magnitude * scale;
    return negative ? -v : v;
}

Circuit parse_netlist(std::string_view text) { return Parser(text).run(); }

Circuit load_netlist(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open netlist '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read netlist '" + path.string() + "'");
    return parse_netlist(buf.str());
}

void validate(const Circuit& c) {
    const auto fail = [](const std::string& m) { throw std::invalid_argument(m); };

    std::set<std::string> names;
    const auto claim = [&](const std::string& n) {
        if (!names.insert(lower(n)).second) fail("duplicate element name '" + n + "'");
    };

    // Union-find over ground + nodes; every element joins its terminals.
    std::vector<std::size_t> parent(c.nodes.size() + 1);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    const auto slot = [&](const std::string& node) -> std::size_t {
        if (node == kGroundNode) return 0;
        try {
            return c.node_index(node) + 1;
        } catch (const std::out_of_range&) {
            fail("node '" + node + "' is not declared");
        }
        return 0;
    };
    const auto join = [&](const std::string& a, const std::string& b) {
        parent[find(slot(a))] = find(slot(b));
    };

    for (const auto& r : c.resistors) {
        claim(r.name);
        if (!(r.ohms > 0.0)) fail("resistance of '" + r.name + "' must be positive");
        join(r.n1, r.n2);
    }
    for (const auto& cap : c.capacitors) {
        claim(cap.name);
        if (!(cap.farads > 0.0)) fail("capacitance of '" + cap.name + "' must be positive");
        join(cap.pos, cap.neg);
    }
    for (const auto& v : c.vsources) {
        claim(v.name);
        join(v.pos, v.neg);
    }
    for (const auto& s : c.isources) {
        claim(s.name);
        join(s.pos, s.neg);
    }
    for (const auto& cell : c.cells) {
        claim(cell.name);
        if (!(cell.inductance > 0.0)) fail("inductance of '" + cell.name + "' must be positive");
        if (!(cell.duty > 0.0 && cell.duty < 1.0)) fail("duty of '" + cell.name + "' must lie in (0, 1)");
        if (cell.kind == CellKind::flyback && !(cell.turns_ratio > 0.0)) {
            fail("turns ratio of '" + cell.name + "' must be positive");
        }
        if (cell.switch_type == SwitchType::diode && cell.initial_current < 0.0) {
            fail("diode cell '" + cell.name + "' initial current must be non-negative");
        }
        join(cell.terminal_a, cell.terminal_c);
        join(cell.terminal_p, cell.terminal_c);
    }
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (find(i + 1) != find(0)) fail("node '" + c.nodes[i] + "' is not connected to ground");
    }

    const auto& d = c.directives;
    if (!(d.switching_frequency > 0.0)) fail("switching frequency must be positive");
    // Small slack so that e.g. ".TRAN 10u" with ".FS 100k" is accepted.
    if (!(d.duration * d.switching_frequency >= 1.0 - 1e-9)) {
        fail("duration shorter than one switching period");
    }
    if (d.oracle_substeps <= 0) fail("oracle steps must be positive");
}

std::string to_netlist(const Circuit& c) {
    std::ostringstream out;
    const auto num = [](double v) { return format_number(v); };
    out << "* cellsim canonical netlist\n";
    for (const auto& v : c.vsources) out << v.name << ' ' << v.pos << ' ' << v.neg << ' ' << num(v.volts) << '\n';
    for (const auto& s : c.isources) out << s.name << ' ' << s.pos << ' ' << s.neg << ' ' << num(s.amps) << '\n';
    for (const auto& r : c.resistors) out << r.name << ' ' << r.n1 << ' ' << r.n2 << ' ' << num(r.ohms) << '\n';
    for (const auto& cap : c.capacitors) {
        out << cap.name << ' ' << cap.pos << ' ' << cap.neg << ' ' << num(cap.farads);
        if (cap.initial_volts != 0.0) out << " IC=" << num(cap.initial_volts);
        out << '\n';
    }
    for (const auto& x : c.cells) {
        out << x.name << ' ' << x.terminal_a << ' ' << x.terminal_p << ' ' << x.terminal_c
            << " CELL KIND=" << to_string(x.kind) << " SW=" << to_string(x.switch_type)
            << " L=" << num(x.inductance) << " D=" << num(x.duty);
        if (x.kind == CellKind::flyback) out << " N=" << num(x.turns_ratio);
        if (x.initial_current != 0.0) out << " IC=" << num(x.initial_current);
        out << '\n';
    }
    out << ".FS " << num(c.directives.switching_frequency) << '\n';
    out << ".TRAN " << num(c.directives.duration) << '\n';
    out << ".ORACLESTEPS " << c.directives.oracle_substeps << '\n';
    out << ".END\n";
    return out.str();
}

std::string_view to_string(CellKind kind) {
    return kind == CellKind::basic ? "basic" : "flyback";
}

std::string_view to_string(SwitchType type) {
    return type == SwitchType::synchronous ? "syn" : "diode";
}

}  // namespace cellsim
