#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "pwh/rate_law.hpp"

namespace pwh {

struct Parameter {
    std::string name;
    double value = 0.0;
    bool is_const = false;  // excluded from fitting
};

struct Reaction {
    std::string name;
    RateLaw rate;
    std::vector<std::pair<int, double>> stoich;  // species index, net coefficient
};

// s_j = H(expr(u)) with H(0) = 1, for every boolean j in `controls`.
struct Guard {
    std::string name;
    AffineExpr expr;
    std::vector<int> controls;
};

struct JumpRule {
    std::string name;
    int guard = -1;
    std::vector<std::pair<int, double>> up;    // applied when the guard goes 0 -> 1
    std::vector<std::pair<int, double>> down;  // applied when the guard goes 1 -> 0
    bool reversible = false;
};

// A boolean driven by time: starts at `initial` and toggles at each listed
// time. Times are parameter indices so that they can be fitted.
struct TimeSchedule {
    int boolean = -1;
    int initial = 0;
    std::vector<int> times;
};

struct ReactionNetwork {
    std::vector<std::string> species;
    std::vector<double> initial;
    std::vector<Parameter> parameters;
    std::vector<Reaction> reactions;
    std::vector<std::string> booleans;
    std::vector<Guard> guards;
    std::vector<JumpRule> jumps;
    std::vector<TimeSchedule> schedules;

    int n_species() const { return static_cast<int>(species.size()); }
    int n_reactions() const { return static_cast<int>(reactions.size()); }
    int n_booleans() const { return static_cast<int>(booleans.size()); }

    int species_index(const std::string& name) const;      // -1 if absent
    int parameter_index(const std::string& name) const;    // -1 if absent
    int reaction_index(const std::string& name) const;     // -1 if absent
    int boolean_index(const std::string& name) const;      // -1 if absent
    int require_parameter(const std::string& name) const;  // throws naming the parameter
    int add_parameter(const std::string& name, double value, bool is_const = false);
    int add_boolean(const std::string& name);

    std::vector<double> parameter_values() const;
    void set_parameter(const std::string& name, double value);

    // Throws ModelError on broken invariants.
    void validate() const;
};

// A network whose booleans are each driven by exactly one guard or schedule.
class HybridModel {
public:
    explicit HybridModel(ReactionNetwork net);
    const ReactionNetwork& network() const { return net_; }
    ReactionNetwork& mutable_network() { return net_; }

private:
    ReactionNetwork net_;
};

// For each boolean: guard index driving it, or -1.
std::vector<int> boolean_guard_map(const ReactionNetwork& net);

void rhs(const ReactionNetwork& net, std::span<const double> u, std::span<const int> s,
         std::span<const double> p, std::span<double> du);
void eval_fluxes(const ReactionNetwork& net, std::span<const double> u, std::span<const int> s,
                 std::span<const double> p, std::span<double> flux);

struct CompiledGuard {
    std::vector<double> w;
    double h = 0.0;
    double value(std::span<const double> u) const;
    bool bit(std::span<const double> u) const { return value(u) >= 0.0; }
};

std::vector<CompiledGuard> compile_guards(const ReactionNetwork& net, std::span<const double> p);
std::vector<int> eval_guards(const std::vector<CompiledGuard>& guards, std::span<const double> u);

// Applies the multipliers of a jump map in place.
void apply_jump(const std::vector<std::pair<int, double>>& map, std::span<double> u);

}  // namespace pwh
