#include "pwh/model_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace pwh {

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

struct Line {
    std::string text;
    int number = 0;
};

// Cursor over one line with column tracking.
class Cursor {
public:
    Cursor(const std::string& text, int line, int col0 = 1) : s_(text), line_(line), col0_(col0) {}

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() {
        skip_ws();
        return pos_ >= s_.size();
    }
    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }
    bool accept(const std::string& tok) {
        skip_ws();
        if (s_.compare(pos_, tok.size(), tok) == 0) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }
    void expect(const std::string& tok) {
        if (!accept(tok)) fail("expected '" + tok + "'");
    }
    bool at_ident() {
        char c = peek();
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }
    bool at_number() {
        char c = peek();
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
    }
    std::string ident() {
        if (!at_ident()) fail("expected identifier");
        size_t b = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        return s_.substr(b, pos_ - b);
    }
    double number() {
        skip_ws();
        double v = 0.0;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc()) fail("expected number");
        pos_ = res.ptr - s_.data();
        return v;
    }
    int column() {
        skip_ws();
        return col0_ + static_cast<int>(pos_);
    }
    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line_, column()); }
    int line() const { return line_; }

private:
    const std::string& s_;
    size_t pos_ = 0;
    int line_;
    int col0_;
};

// A product term: scale * params * species^powers.
struct Term {
    double scale = 1.0;
    std::vector<int> params;
    std::vector<std::pair<int, double>> powers;
};

class ExprParser {
public:
    ExprParser(const ReactionNetwork& net, Cursor& c) : net_(net), c_(c) {}

    std::vector<Term> sum() {
        std::vector<Term> out;
        double sign = 1.0;
        if (c_.accept("-"))
            sign = -1.0;
        else
            c_.accept("+");
        out.push_back(product(sign));
        while (true) {
            if (c_.accept("+"))
                out.push_back(product(1.0));
            else if (c_.accept("-"))
                out.push_back(product(-1.0));
            else
                break;
        }
        return out;
    }

    Term product(double sign) {
        Term t;
        t.scale = sign;
        factor(t);
        while (c_.accept("*")) factor(t);
        return t;
    }

    void factor(Term& t) {
        if (c_.at_number()) {
            t.scale *= c_.number();
            return;
        }
        int col = c_.column();
        std::string name = c_.ident();
        int si = net_.species_index(name);
        if (si >= 0) {
            double a = 1.0;
            if (c_.accept("^")) a = c_.number();
            for (auto& pw : t.powers)
                if (pw.first == si) {
                    pw.second += a;
                    return;
                }
            t.powers.push_back({si, a});
            return;
        }
        int pi = net_.parameter_index(name);
        if (pi < 0) throw ParseError("unknown name '" + name + "'", c_.line(), col);
        t.params.push_back(pi);
    }

    Monomial monomial() {
        int col = c_.column();
        auto terms = sum();
        if (terms.size() != 1) throw ParseError("expected a single product term", c_.line(), col);
        return {{terms[0].scale, terms[0].params}, terms[0].powers};
    }

    AffineExpr affine() {
        int col = c_.column();
        auto terms = sum();
        AffineExpr e;
        for (auto& t : terms) {
            AffineTerm at{{t.scale, t.params}, -1};
            if (t.powers.size() > 1 || (t.powers.size() == 1 && t.powers[0].second != 1.0))
                throw ParseError("expression is not affine in species", c_.line(), col);
            if (!t.powers.empty()) at.species = t.powers[0].first;
            e.terms.push_back(at);
        }
        try {
            e.validate(net_.n_species());
        } catch (const ModelError& err) {
            throw ParseError(err.what(), c_.line(), col);
        }
        return e;
    }

    int param() {
        int col = c_.column();
        std::string name = c_.ident();
        int pi = net_.parameter_index(name);
        if (pi < 0) throw ParseError("unknown parameter '" + name + "'", c_.line(), col);
        return pi;
    }

private:
    const ReactionNetwork& net_;
    Cursor& c_;
};

std::string strip_comment(const std::string& s) {
    auto p = s.find('#');
    return p == std::string::npos ? s : s.substr(0, p);
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Splits on `sep` and returns (piece, starting column) pairs.
std::vector<std::pair<std::string, int>> split_cols(const std::string& s, char sep) {
    std::vector<std::pair<std::string, int>> out;
    size_t b = 0;
    while (true) {
        size_t e = s.find(sep, b);
        out.push_back({s.substr(b, e == std::string::npos ? std::string::npos : e - b), static_cast<int>(b) + 1});
        if (e == std::string::npos) break;
        b = e + 1;
    }
    return out;
}

int bool_ref(ReactionNetwork& net, Cursor& c) { return net.add_boolean(c.ident()); }

void parse_side(ReactionNetwork& net, const std::string& text, int line, int col0, double sign,
                std::map<int, double>& st) {
    Cursor c(text, line, col0);
    if (c.done()) return;
    while (true) {
        double k = 1.0;
        if (c.at_number()) k = c.number();
        int col = c.column();
        std::string name = c.ident();
        int si = net.species_index(name);
        if (si < 0) throw ParseError("unknown species '" + name + "'", line, col);
        st[si] += sign * k;
        if (c.done()) break;
        c.expect("+");
    }
}

Reaction parse_reaction(ReactionNetwork& net, const Line& ln) {
    auto parts = split_cols(ln.text, ':');
    if (parts.size() != 3) throw ParseError("reaction needs 'name : stoichiometry : law'", ln.number, 1);
    Reaction r;
    r.name = trim(parts[0].first);
    if (r.name.empty()) throw ParseError("missing reaction name", ln.number, 1);
    const auto& [st_text, st_col] = parts[1];
    auto arrow = st_text.find("->");
    if (arrow == std::string::npos) throw ParseError("expected '->'", ln.number, st_col);
    std::map<int, double> st;
    parse_side(net, st_text.substr(0, arrow), ln.number, st_col, -1.0, st);
    parse_side(net, st_text.substr(arrow + 2), ln.number, st_col + static_cast<int>(arrow) + 2, 1.0, st);
    for (auto& [i, k] : st)
        if (k != 0.0) r.stoich.push_back({i, k});
    if (r.stoich.empty()) throw ParseError("empty stoichiometry", ln.number, st_col);

    Cursor c(parts[2].first, ln.number, parts[2].second);
    ExprParser ep(net, c);
    int kind_col = c.column();
    std::string kind = c.ident();
    c.expect("(");
    if (kind == "const") {
        auto m = ep.monomial();
        if (!m.powers.empty()) throw ParseError("const law cannot reference species", ln.number, kind_col);
        r.rate = law::Constant{m.coef};
    } else if (kind == "mono") {
        r.rate = law::Mono{ep.monomial()};
    } else if (kind == "mm") {
        law::MichaelisMenten m;
        m.prefactor = ep.monomial();
        c.expect(";");
        m.x = ep.affine();
        c.expect(";");
        m.km = ep.param();
        r.rate = m;
    } else if (kind == "gk") {
        law::GoldbeterKoshland g;
        g.prefactor = ep.monomial();
        c.expect(";");
        g.v1 = ep.affine();
        c.expect(";");
        g.v2 = ep.affine();
        c.expect(";");
        g.j1 = ep.param();
        c.expect(";");
        g.j2 = ep.param();
        r.rate = g;
    } else if (kind == "switched") {
        law::SwitchedMonomial m;
        m.boolean = bool_ref(net, c);
        c.expect(";");
        m.on = ep.monomial();
        r.rate = m;
    } else if (kind == "switched_linear") {
        law::SwitchedLinear m;
        m.boolean = bool_ref(net, c);
        c.expect(";");
        m.prefactor = ep.monomial();
        c.expect(";");
        m.k_sat = ep.param();
        c.expect(";");
        m.k_lin = ep.param();
        c.expect(";");
        m.x = ep.affine();
        r.rate = m;
    } else if (kind == "linear") {
        law::Linear m;
        m.prefactor = ep.monomial();
        c.expect(";");
        m.k = ep.param();
        c.expect(";");
        m.x = ep.affine();
        r.rate = m;
    } else {
        throw ParseError("unknown rate law '" + kind + "'", ln.number, kind_col);
    }
    c.expect(")");
    if (!c.done()) c.fail("trailing characters");
    return r;
}

Guard parse_guard(ReactionNetwork& net, const Line& ln) {
    auto parts = split_cols(ln.text, ':');
    if (parts.size() != 3) throw ParseError("guard needs 'name : booleans : lhs >= rhs'", ln.number, 1);
    Guard g;
    g.name = trim(parts[0].first);
    {
        Cursor c(parts[1].first, ln.number, parts[1].second);
        while (!c.done()) {
            g.controls.push_back(bool_ref(net, c));
            if (!c.done()) c.expect(",");
        }
    }
    Cursor c(parts[2].first, ln.number, parts[2].second);
    ExprParser ep(net, c);
    AffineExpr lhs = ep.affine();
    c.expect(">=");
    int col = c.column();
    AffineExpr rhs = ep.affine();
    if (!c.done()) c.fail("trailing characters");
    g.expr = lhs;
    for (auto t : rhs.terms) {
        if (t.species < 0 && t.coef.params.empty() && t.coef.scale == 0.0) continue;
        t.coef.scale = -t.coef.scale;
        if (t.species >= 0)
            for (const auto& l : g.expr.terms)
                if (l.species == t.species) throw ParseError("species on both sides of a guard", ln.number, col);
        g.expr.terms.push_back(t);
    }
    return g;
}

std::vector<std::pair<int, double>> parse_jump_map(const ReactionNetwork& net, const std::string& text,
                                                   int line, int col0) {
    Cursor c(text, line, col0);
    std::vector<std::pair<int, double>> out;
    if (c.accept("identity")) {
        if (!c.done()) c.fail("trailing characters");
        return out;
    }
    while (true) {
        int col = c.column();
        std::string name = c.ident();
        int si = net.species_index(name);
        if (si < 0) throw ParseError("unknown species '" + name + "'", line, col);
        c.expect("*");
        out.push_back({si, c.number()});
        if (c.done()) break;
        c.expect(",");
    }
    return out;
}

JumpRule parse_jump(const ReactionNetwork& net, const Line& ln) {
    auto parts = split_cols(ln.text, ':');
    if (parts.size() < 4 || parts.size() > 5)
        throw ParseError("jump needs 'name : guard : up map : down map [: reversible]'", ln.number, 1);
    JumpRule j;
    j.name = trim(parts[0].first);
    std::string gname = trim(parts[1].first);
    for (size_t i = 0; i < net.guards.size(); ++i)
        if (net.guards[i].name == gname) j.guard = static_cast<int>(i);
    if (j.guard < 0) throw ParseError("unknown guard '" + gname + "'", ln.number, parts[1].second);
    for (int k = 2; k <= 3; ++k) {
        Cursor c(parts[k].first, ln.number, parts[k].second);
        std::string dir = c.ident();
        if (dir != (k == 2 ? "up" : "down")) c.fail(k == 2 ? "expected 'up'" : "expected 'down'");
        std::string rest = parts[k].first;
        auto at = rest.find(dir);
        auto map = parse_jump_map(net, rest.substr(at + dir.size()), ln.number,
                                  parts[k].second + static_cast<int>(at + dir.size()));
        (k == 2 ? j.up : j.down) = std::move(map);
    }
    if (parts.size() == 5) {
        if (trim(parts[4].first) != "reversible") throw ParseError("expected 'reversible'", ln.number, parts[4].second);
        j.reversible = true;
    }
    return j;
}

TimeSchedule parse_schedule(ReactionNetwork& net, const Line& ln) {
    auto parts = split_cols(ln.text, ':');
    if (parts.size() != 3) throw ParseError("schedule needs 'boolean : initial : times'", ln.number, 1);
    TimeSchedule s;
    {
        Cursor c(parts[0].first, ln.number, parts[0].second);
        s.boolean = bool_ref(net, c);
    }
    {
        Cursor c(parts[1].first, ln.number, parts[1].second);
        double v = c.number();
        if (v != 0.0 && v != 1.0) throw ParseError("initial value must be 0 or 1", ln.number, parts[1].second);
        s.initial = static_cast<int>(v);
    }
    Cursor c(parts[2].first, ln.number, parts[2].second);
    ExprParser ep(net, c);
    while (!c.done()) {
        s.times.push_back(ep.param());
        if (!c.done()) c.expect(",");
    }
    return s;
}

}  // namespace

ReactionNetwork parse_model(std::istream& in) {
    std::map<std::string, std::vector<Line>> sections;
    static const std::vector<std::string> known = {"species", "parameters", "booleans", "reactions",
                                                   "guards",  "jumps",      "schedules"};
    std::string current;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::string text = strip_comment(raw);
        std::string t = trim(text);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError("malformed section header", number, 1);
            current = trim(t.substr(1, t.size() - 2));
            if (std::find(known.begin(), known.end(), current) == known.end())
                throw ParseError("unknown section '" + current + "'", number, 2);
            continue;
        }
        if (current.empty()) throw ParseError("content before first section", number, 1);
        sections[current].push_back({text, number});
    }

    ReactionNetwork net;
    for (const auto& ln : sections["species"]) {
        Cursor c(ln.text, ln.number);
        std::string name = c.ident();
        if (net.species_index(name) >= 0) c.fail("duplicate species '" + name + "'");
        double v = c.number();
        if (!(v >= 0.0) || !std::isfinite(v)) c.fail("initial value must be finite and nonnegative");
        if (!c.done()) c.fail("trailing characters");
        net.species.push_back(name);
        net.initial.push_back(v);
    }
    for (const auto& ln : sections["parameters"]) {
        Cursor c(ln.text, ln.number);
        std::string name = c.ident();
        if (net.parameter_index(name) >= 0 || net.species_index(name) >= 0) c.fail("duplicate name '" + name + "'");
        c.expect("=");
        bool neg = c.accept("-");
        double v = c.number();
        if (neg) v = -v;
        bool is_const = false;
        if (!c.done()) {
            if (c.ident() != "const") c.fail("expected 'const'");
            is_const = true;
        }
        if (!c.done()) c.fail("trailing characters");
        net.parameters.push_back({name, v, is_const});
    }
    for (const auto& ln : sections["booleans"]) {
        Cursor c(ln.text, ln.number);
        std::string name = c.ident();
        if (net.boolean_index(name) >= 0) c.fail("duplicate boolean '" + name + "'");
        if (!c.done()) c.fail("trailing characters");
        net.booleans.push_back(name);
    }
    for (const auto& ln : sections["reactions"]) {
        auto r = parse_reaction(net, ln);
        if (net.reaction_index(r.name) >= 0) throw ParseError("duplicate reaction '" + r.name + "'", ln.number, 1);
        net.reactions.push_back(std::move(r));
    }
    for (const auto& ln : sections["guards"]) net.guards.push_back(parse_guard(net, ln));
    for (const auto& ln : sections["jumps"]) net.jumps.push_back(parse_jump(net, ln));
    for (const auto& ln : sections["schedules"]) net.schedules.push_back(parse_schedule(net, ln));
    try {
        net.validate();
    } catch (const ModelError& e) {
        throw ParseError(e.what(), number, 1);
    }
    return net;
}

ReactionNetwork parse_model_string(const std::string& text) {
    std::istringstream in(text);
    return parse_model(in);
}

ReactionNetwork load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    return parse_model(in);
}

namespace {

std::string coef_factors(const ReactionNetwork& net, const Coef& c, bool& empty) {
    std::string out;
    empty = true;
    double a = std::abs(c.scale);
    if (a != 1.0) {
        out += format_double(a);
        empty = false;
    }
    for (int q : c.params) {
        if (!empty) out += "*";
        out += net.parameters[q].name;
        empty = false;
    }
    return out;
}

}  // namespace

std::string monomial_to_string(const ReactionNetwork& net, const Monomial& m) {
    bool empty = true;
    std::string out = m.coef.scale < 0 ? "-" : "";
    out += coef_factors(net, m.coef, empty);
    for (const auto& [i, a] : m.powers) {
        if (!empty) out += "*";
        out += net.species[i];
        if (a != 1.0) out += "^" + format_double(a);
        empty = false;
    }
    if (empty) out += "1";
    return out;
}

std::string affine_to_string(const ReactionNetwork& net, const AffineExpr& e) {
    if (e.terms.empty()) return "0";
    std::string out;
    for (size_t k = 0; k < e.terms.size(); ++k) {
        const auto& t = e.terms[k];
        bool neg = t.coef.scale < 0;
        if (k == 0)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        bool empty = true;
        std::string f = coef_factors(net, t.coef, empty);
        if (t.species >= 0) {
            if (!empty) f += "*";
            f += net.species[t.species];
            empty = false;
        }
        out += empty ? "1" : f;
    }
    return out;
}

void write_model(std::ostream& out, const ReactionNetwork& net, const std::string& header) {
    if (!header.empty()) {
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) out << "# " << l << "\n";
    }
    out << "[species]\n";
    for (int i = 0; i < net.n_species(); ++i) out << net.species[i] << " " << format_double(net.initial[i]) << "\n";
    out << "\n[parameters]\n";
    for (const auto& p : net.parameters)
        out << p.name << " = " << format_double(p.value) << (p.is_const ? " const" : "") << "\n";
    if (!net.booleans.empty()) {
        out << "\n[booleans]\n";
        for (const auto& b : net.booleans) out << b << "\n";
    }
    out << "\n[reactions]\n";
    for (const auto& r : net.reactions) {
        std::string lhs, rhs;
        for (const auto& [i, k] : r.stoich) {
            std::string& side = k < 0 ? lhs : rhs;
            if (!side.empty()) side += " + ";
            double a = std::abs(k);
            if (a != 1.0) side += format_double(a) + " ";
            side += net.species[i];
        }
        out << r.name << " : " << lhs << (lhs.empty() ? "" : " ") << "->" << (rhs.empty() ? "" : " ") << rhs << " : ";
        auto pn = [&](int q) { return net.parameters[q].name; };
        std::visit(
            [&](const auto& law) {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, law::Constant>) {
                    out << "const(" << monomial_to_string(net, Monomial{law.k, {}}) << ")";
                } else if constexpr (std::is_same_v<T, law::Mono>) {
                    out << "mono(" << monomial_to_string(net, law.m) << ")";
                } else if constexpr (std::is_same_v<T, law::MichaelisMenten>) {
                    out << "mm(" << monomial_to_string(net, law.prefactor) << "; " << affine_to_string(net, law.x)
                        << "; " << pn(law.km) << ")";
                } else if constexpr (std::is_same_v<T, law::GoldbeterKoshland>) {
                    out << "gk(" << monomial_to_string(net, law.prefactor) << "; " << affine_to_string(net, law.v1)
                        << "; " << affine_to_string(net, law.v2) << "; " << pn(law.j1) << "; " << pn(law.j2) << ")";
                } else if constexpr (std::is_same_v<T, law::SwitchedMonomial>) {
                    out << "switched(" << net.booleans[law.boolean] << "; " << monomial_to_string(net, law.on) << ")";
                } else if constexpr (std::is_same_v<T, law::SwitchedLinear>) {
                    out << "switched_linear(" << net.booleans[law.boolean] << "; "
                        << monomial_to_string(net, law.prefactor) << "; " << pn(law.k_sat) << "; " << pn(law.k_lin)
                        << "; " << affine_to_string(net, law.x) << ")";
                } else {
                    out << "linear(" << monomial_to_string(net, law.prefactor) << "; " << pn(law.k) << "; "
                        << affine_to_string(net, law.x) << ")";
                }
            },
            r.rate);
        out << "\n";
    }
    if (!net.guards.empty()) {
        out << "\n[guards]\n";
        for (const auto& g : net.guards) {
            out << g.name << " : ";
            for (size_t k = 0; k < g.controls.size(); ++k) out << (k ? ", " : "") << net.booleans[g.controls[k]];
            out << " : " << affine_to_string(net, g.expr) << " >= 0\n";
        }
    }
    if (!net.jumps.empty()) {
        out << "\n[jumps]\n";
        auto map_str = [&](const std::vector<std::pair<int, double>>& m) {
            if (m.empty()) return std::string("identity");
            std::string s;
            for (size_t k = 0; k < m.size(); ++k)
                s += (k ? ", " : "") + net.species[m[k].first] + "*" + format_double(m[k].second);
            return s;
        };
        for (const auto& j : net.jumps)
            out << j.name << " : " << net.guards[j.guard].name << " : up " << map_str(j.up) << " : down "
                << map_str(j.down) << (j.reversible ? " : reversible" : "") << "\n";
    }
    if (!net.schedules.empty()) {
        out << "\n[schedules]\n";
        for (const auto& s : net.schedules) {
            out << net.booleans[s.boolean] << " : " << s.initial << " :";
            for (size_t k = 0; k < s.times.size(); ++k) out << (k ? ", " : " ") << net.parameters[s.times[k]].name;
            out << "\n";
        }
    }
}

void save_model(const std::string& path, const ReactionNetwork& net, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_model(out, net, header);
}

void apply_parameter_file(ReactionNetwork& net, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open parameter file " + path);
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        std::string text = strip_comment(raw);
        if (trim(text).empty() || trim(text).front() == '[') continue;
        Cursor c(text, number);
        int col = c.column();
        std::string name = c.ident();
        c.expect("=");
        bool neg = c.accept("-");
        double v = c.number();
        int i = net.parameter_index(name);
        if (i < 0) throw ParseError("unknown parameter '" + name + "'", number, col);
        net.parameters[i].value = neg ? -v : v;
    }
}

void write_parameters(std::ostream& out, const ReactionNetwork& net) {
    for (const auto& p : net.parameters) out << p.name << " = " << format_double(p.value) << "\n";
}

}  // namespace pwh
