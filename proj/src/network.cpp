#include "pwh/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <type_traits>

namespace pwh {

namespace {
template <class T>
int find_name(const std::vector<T>& v, const std::string& name, std::string T::*field) {
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i].*field == name) return static_cast<int>(i);
    return -1;
}
}  // namespace

int ReactionNetwork::species_index(const std::string& name) const {
    auto it = std::find(species.begin(), species.end(), name);
    return it == species.end() ? -1 : static_cast<int>(it - species.begin());
}

int ReactionNetwork::parameter_index(const std::string& name) const {
    return find_name(parameters, name, &Parameter::name);
}

int ReactionNetwork::reaction_index(const std::string& name) const {
    return find_name(reactions, name, &Reaction::name);
}

int ReactionNetwork::boolean_index(const std::string& name) const {
    auto it = std::find(booleans.begin(), booleans.end(), name);
    return it == booleans.end() ? -1 : static_cast<int>(it - booleans.begin());
}

int ReactionNetwork::require_parameter(const std::string& name) const {
    int i = parameter_index(name);
    if (i < 0) throw ModelError("unknown parameter '" + name + "'");
    return i;
}

int ReactionNetwork::add_parameter(const std::string& name, double value, bool is_const) {
    int i = parameter_index(name);
    if (i >= 0) {
        parameters[i].value = value;
        parameters[i].is_const = is_const;
        return i;
    }
    parameters.push_back({name, value, is_const});
    return static_cast<int>(parameters.size()) - 1;
}

int ReactionNetwork::add_boolean(const std::string& name) {
    int i = boolean_index(name);
    if (i >= 0) return i;
    booleans.push_back(name);
    return static_cast<int>(booleans.size()) - 1;
}

std::vector<double> ReactionNetwork::parameter_values() const {
    std::vector<double> p(parameters.size());
    for (size_t i = 0; i < p.size(); ++i) p[i] = parameters[i].value;
    return p;
}

void ReactionNetwork::set_parameter(const std::string& name, double value) {
    parameters[require_parameter(name)].value = value;
}

void ReactionNetwork::validate() const {
    if (species.empty()) throw ModelError("network has no species");
    if (initial.size() != species.size()) throw ModelError("initial state size mismatch");
    std::set<std::string> names;
    for (const auto& s : species)
        if (!names.insert(s).second) throw ModelError("duplicate name '" + s + "'");
    for (const auto& p : parameters)
        if (!names.insert(p.name).second) throw ModelError("duplicate name '" + p.name + "'");
    const int np = static_cast<int>(parameters.size());
    const int ns = n_species();
    auto check_params = [&](const std::vector<int>& idx, const std::string& where) {
        for (int q : idx)
            if (q < 0 || q >= np) throw ModelError(where + ": unresolved parameter");
    };
    for (const auto& r : reactions) {
        if (r.stoich.empty()) throw ModelError("reaction " + r.name + " has empty stoichiometry");
        for (const auto& [i, c] : r.stoich)
            if (i < 0 || i >= ns) throw ModelError("reaction " + r.name + ": bad species index");
        check_params(parameters_of(r.rate), "reaction " + r.name);
        if (auto b = boolean_of(r.rate); b && (*b < 0 || *b >= n_booleans()))
            throw ModelError("reaction " + r.name + ": bad boolean index");
        std::visit(
            [&](const auto& law) {
                using T = std::decay_t<decltype(law)>;
                if constexpr (requires { law.x; }) law.x.validate(ns);
                if constexpr (std::is_same_v<T, law::GoldbeterKoshland>) {
                    law.v1.validate(ns);
                    law.v2.validate(ns);
                }
            },
            r.rate);
    }
    for (const auto& g : guards) {
        g.expr.validate(ns);
        check_params(g.expr.parameters(), "guard " + g.name);
        if (g.expr.species().empty()) throw ModelError("guard " + g.name + " has no species term");
        for (int b : g.controls)
            if (b < 0 || b >= n_booleans()) throw ModelError("guard " + g.name + ": bad boolean index");
    }
    for (const auto& j : jumps) {
        if (j.guard < 0 || j.guard >= static_cast<int>(guards.size()))
            throw ModelError("jump " + j.name + ": bad guard index");
        for (const auto* m : {&j.up, &j.down})
            for (const auto& [i, f] : *m)
                if (i < 0 || i >= ns || !std::isfinite(f)) throw ModelError("jump " + j.name + ": bad map entry");
        if (j.reversible) {
            for (int i = 0; i < ns; ++i) {
                double a = 1.0, b = 1.0;
                for (const auto& [k, f] : j.up)
                    if (k == i) a *= f;
                for (const auto& [k, f] : j.down)
                    if (k == i) b *= f;
                if (a * b != 1.0) throw ModelError("jump " + j.name + ": reversible maps are not inverse");
            }
        }
    }
    for (const auto& s : schedules) {
        if (s.boolean < 0 || s.boolean >= n_booleans()) throw ModelError("schedule: bad boolean index");
        check_params(s.times, "schedule " + booleans[s.boolean]);
    }
}

std::vector<int> boolean_guard_map(const ReactionNetwork& net) {
    std::vector<int> out(net.n_booleans(), -1);
    for (size_t g = 0; g < net.guards.size(); ++g)
        for (int b : net.guards[g].controls) out[b] = static_cast<int>(g);
    return out;
}

HybridModel::HybridModel(ReactionNetwork net) : net_(std::move(net)) {
    net_.validate();
    std::vector<int> drivers(net_.n_booleans(), 0);
    for (const auto& g : net_.guards)
        for (int b : g.controls) ++drivers[b];
    for (const auto& s : net_.schedules) ++drivers[s.boolean];
    for (const auto& r : net_.reactions) {
        if (auto b = boolean_of(r.rate); b && drivers[*b] != 1)
            throw ModelError("boolean " + net_.booleans[*b] + " must be driven by exactly one guard or schedule");
    }
    for (int b = 0; b < net_.n_booleans(); ++b)
        if (drivers[b] > 1) throw ModelError("boolean " + net_.booleans[b] + " has several drivers");
}

void eval_fluxes(const ReactionNetwork& net, std::span<const double> u, std::span<const int> s,
                 std::span<const double> p, std::span<double> flux) {
    for (size_t r = 0; r < net.reactions.size(); ++r) flux[r] = eval_rate(net.reactions[r].rate, u, s, p);
}

void rhs(const ReactionNetwork& net, std::span<const double> u, std::span<const int> s,
         std::span<const double> p, std::span<double> du) {
    std::fill(du.begin(), du.end(), 0.0);
    for (const auto& r : net.reactions) {
        double v = eval_rate(r.rate, u, s, p);
        for (const auto& [i, c] : r.stoich) du[i] += c * v;
    }
}

double CompiledGuard::value(std::span<const double> u) const {
    double v = -h;
    for (size_t i = 0; i < w.size(); ++i) v += w[i] * u[i];
    return v;
}

std::vector<CompiledGuard> compile_guards(const ReactionNetwork& net, std::span<const double> p) {
    std::vector<CompiledGuard> out;
    for (const auto& g : net.guards) {
        auto na = to_numeric(g.expr, net.n_species(), p);
        out.push_back({std::move(na.w), na.h});
    }
    return out;
}

std::vector<int> eval_guards(const std::vector<CompiledGuard>& guards, std::span<const double> u) {
    std::vector<int> out(guards.size());
    for (size_t j = 0; j < guards.size(); ++j) out[j] = guards[j].bit(u) ? 1 : 0;
    return out;
}

void apply_jump(const std::vector<std::pair<int, double>>& map, std::span<double> u) {
    for (const auto& [i, f] : map) u[i] *= f;
}

}  // namespace pwh
