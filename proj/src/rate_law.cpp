#include "pwh/rate_law.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pwh {

namespace {
thread_local long g_gk_clamps = 0;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

long gk_clamp_count() { return g_gk_clamps; }
void reset_gk_clamp_count() { g_gk_clamps = 0; }

double Coef::eval(std::span<const double> p) const {
    double v = scale;
    for (int i : params) v *= p[i];
    return v;
}

double Monomial::eval(std::span<const double> u, std::span<const double> p) const {
    double v = coef.eval(p);
    for (const auto& [i, a] : powers) {
        if (a == 1.0)
            v *= u[i];
        else if (a == 2.0)
            v *= u[i] * u[i];
        else
            v *= std::pow(std::max(u[i], 0.0), a);
    }
    return v;
}

double AffineExpr::eval(std::span<const double> u, std::span<const double> p) const {
    double v = 0.0;
    for (const auto& t : terms) {
        double c = t.coef.eval(p);
        v += t.species < 0 ? c : c * u[t.species];
    }
    return v;
}

AffineExpr AffineExpr::canonical() const {
    AffineExpr out = *this;
    for (auto& t : out.terms) std::sort(t.coef.params.begin(), t.coef.params.end());
    std::sort(out.terms.begin(), out.terms.end(), [](const AffineTerm& a, const AffineTerm& b) {
        if (a.species != b.species) return a.species < b.species;
        if (a.coef.params != b.coef.params) return a.coef.params < b.coef.params;
        return a.coef.scale < b.coef.scale;
    });
    return out;
}

bool AffineExpr::structurally_equal(const AffineExpr& other) const {
    return canonical() == other.canonical();
}

std::vector<int> AffineExpr::species() const {
    std::vector<int> out;
    for (const auto& t : terms)
        if (t.species >= 0 && std::find(out.begin(), out.end(), t.species) == out.end()) out.push_back(t.species);
    return out;
}

std::vector<int> AffineExpr::parameters() const {
    std::vector<int> out;
    for (const auto& t : terms)
        for (int q : t.coef.params)
            if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    return out;
}

void AffineExpr::validate(int n_species) const {
    for (const auto& t : terms) {
        if (t.species < 0) continue;
        if (t.species >= n_species) throw ModelError("affine expression: species index out of range");
    }
}

NumericAffine to_numeric(const AffineExpr& e, int n_species, std::span<const double> p) {
    NumericAffine out;
    out.w.assign(n_species, 0.0);
    for (const auto& t : e.terms) {
        double c = t.coef.eval(p);
        if (t.species < 0)
            out.h -= c;
        else
            out.w[t.species] += c;
    }
    return out;
}

double eval_gk(double v1, double v2, double j1, double j2) {
    if (std::isnan(v1) || std::isnan(v2) || std::isnan(j1) || std::isnan(j2))
        throw ModelError("eval_gk: NaN input");
    double b = v2 - v1 + j1 * v2 + j2 * v1;
    double disc = b * b - 4.0 * (v2 - v1) * v1 * j2;
    if (disc < 0.0) {
        ++g_gk_clamps;
        disc = 0.0;
    }
    double num = 2.0 * v1 * j2;
    if (num == 0.0) return 0.0;
    if (v2 == 0.0) return 1.0;
    // b < 0 forces v2 < v1; the other root form avoids cancellation there.
    if (b < 0.0) return std::clamp((b - std::sqrt(disc)) / (2.0 * (v2 - v1)), 0.0, 1.0);
    double den = b + std::sqrt(disc);
    if (den <= 0.0) return 1.0;
    return std::clamp(num / den, 0.0, 1.0);
}

double eval_mm(double k, double km, double x) {
    if (std::isnan(x) || std::isnan(k) || std::isnan(km)) throw ModelError("eval_mm: NaN input");
    if (x < 0.0) throw ModelError("eval_mm: negative substrate");
    return k * x / (x + km);
}

double eval_rate(const RateLaw& r, std::span<const double> u, std::span<const int> s,
                 std::span<const double> p) {
    return std::visit(
        overloaded{
            [&](const law::Constant& c) { return c.k.eval(p); },
            [&](const law::Mono& m) { return m.m.eval(u, p); },
            [&](const law::MichaelisMenten& m) {
                double x = std::max(m.x.eval(u, p), 0.0);
                return m.prefactor.eval(u, p) * x / (x + p[m.km]);
            },
            [&](const law::GoldbeterKoshland& g) {
                double v1 = std::max(g.v1.eval(u, p), 0.0);
                double v2 = std::max(g.v2.eval(u, p), 0.0);
                return g.prefactor.eval(u, p) * eval_gk(v1, v2, p[g.j1], p[g.j2]);
            },
            [&](const law::SwitchedMonomial& m) { return s[m.boolean] ? m.on.eval(u, p) : 0.0; },
            [&](const law::SwitchedLinear& m) {
                double pre = m.prefactor.eval(u, p);
                if (s[m.boolean]) return pre * p[m.k_sat];
                return pre * p[m.k_lin] * std::max(m.x.eval(u, p), 0.0);
            },
            [&](const law::Linear& m) {
                return m.prefactor.eval(u, p) * p[m.k] * std::max(m.x.eval(u, p), 0.0);
            },
        },
        r);
}

std::string kind_name(const RateLaw& r) {
    static const char* names[] = {"const", "mono", "mm", "gk", "switched", "switched_linear", "linear"};
    return names[r.index()];
}

bool is_switched(const RateLaw& r) {
    return std::holds_alternative<law::SwitchedMonomial>(r) || std::holds_alternative<law::SwitchedLinear>(r);
}

std::optional<int> boolean_of(const RateLaw& r) {
    if (auto* m = std::get_if<law::SwitchedMonomial>(&r)) return m->boolean;
    if (auto* m = std::get_if<law::SwitchedLinear>(&r)) return m->boolean;
    return std::nullopt;
}

std::vector<int> parameters_of(const RateLaw& r) {
    std::vector<int> out;
    auto add = [&](int q) {
        if (q >= 0 && std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    };
    auto add_coef = [&](const Coef& c) {
        for (int q : c.params) add(q);
    };
    auto add_aff = [&](const AffineExpr& e) {
        for (int q : e.parameters()) add(q);
    };
    std::visit(overloaded{
                   [&](const law::Constant& c) { add_coef(c.k); },
                   [&](const law::Mono& m) { add_coef(m.m.coef); },
                   [&](const law::MichaelisMenten& m) {
                       add_coef(m.prefactor.coef);
                       add_aff(m.x);
                       add(m.km);
                   },
                   [&](const law::GoldbeterKoshland& g) {
                       add_coef(g.prefactor.coef);
                       add_aff(g.v1);
                       add_aff(g.v2);
                       add(g.j1);
                       add(g.j2);
                   },
                   [&](const law::SwitchedMonomial& m) { add_coef(m.on.coef); },
                   [&](const law::SwitchedLinear& m) {
                       add_coef(m.prefactor.coef);
                       add(m.k_sat);
                       add(m.k_lin);
                       add_aff(m.x);
                   },
                   [&](const law::Linear& m) {
                       add_coef(m.prefactor.coef);
                       add(m.k);
                       add_aff(m.x);
                   },
               },
               r);
    return out;
}

}  // namespace pwh
