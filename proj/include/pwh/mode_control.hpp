#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pwh/events.hpp"
#include "pwh/network.hpp"
#include "pwh/simplex.hpp"
#include "pwh/simulate.hpp"

namespace pwh {

struct ControlLpConfig {
    double margin = 1e-6;        // times state_scale
    double epsilon_bound = 10.0; // times state_scale
    double state_scale = 1.0;
    int stride = 1;              // use every stride-th grid point
    int exclude_steps = 2;       // grid points dropped on each side of a switch
};

// Constraints s_l * (w . u_l - 1) + eps >= margin, stored as rows s_l * u_l.
struct ControlLP {
    std::vector<int> species;               // candidate set, species indices
    std::vector<std::vector<double>> rows;  // s_l * u_l restricted to `species`
    std::vector<double> signs;              // s_l in {-1, +1}
    double margin = 1e-6;
    double epsilon_bound = 10.0;
};

// Sample indices kept for a schedule: stride, minus the switch windows, with
// at least one sample per interval.
std::vector<size_t> control_samples(const Trajectory& traj, const BooleanSchedule& sch, const ControlLpConfig& cfg);

ControlLP build_control_lp(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& candidates,
                           const ControlLpConfig& cfg = {});

struct ControlSolution {
    LpStatus status = LpStatus::NumericalFailure;
    std::vector<double> w;  // guard: w . u - 1 >= 0
    double epsilon = 0.0;
    bool clamped = false;   // epsilon sits at its lower bound
    int iterations = 0;
    std::string diagnostics;
};

// Solves the control LP through its dual, which has one row per weight.
ControlSolution solve_control_lp(const ControlLP& lp);

// The same LP in primal form, for cross-checks.
Lp control_lp_primal(const ControlLP& lp);

struct GaConfig {
    int population = 64;
    int generations = 100;
    double mutation_rate = 0.0;  // 0: 1/n
    int elitism = 2;
    double parsimony = 0.0;      // added to epsilon per selected species
    int threads = 0;
    ControlLpConfig lp;
};

struct GaResult {
    std::vector<int> subset;  // species indices
    ControlSolution solution;
    double score = 0.0;       // epsilon + parsimony * |subset|
    std::vector<double> best_history;  // best score after each generation
};

GaResult ga_select_controls(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& pool,
                            const GaConfig& cfg, std::uint64_t seed);

// Every nonempty subset of `pool` (|pool| <= 20); same ordering as the GA.
GaResult exhaustive_select_controls(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& pool,
                                    const ControlLpConfig& cfg, double parsimony = 0.0);

struct BooleanReplay {
    std::string boolean;
    long samples = 0;
    long mismatches = 0;
    double mismatch_fraction = 0.0;
    long sim_mismatches = 0;               // against a fresh hybrid simulation
    double sim_mismatch_fraction = 0.0;
    std::vector<double> event_shifts;      // simulated minus scheduled switch time; NaN when unmatched
};

struct ControlValidation {
    std::vector<BooleanReplay> booleans;
    bool simulated = false;
    bool diverged = false;
    std::string diagnostics;
};

struct ValidateConfig {
    ControlLpConfig lp;
    bool simulate = true;
    double divergence_factor = 10.0;  // states beyond this multiple of the reference maximum
    IntegratorConfig integrator;
};

// Replays the model's guards along `traj` and a fresh simulation from its
// first row, comparing with the schedules (matched by boolean name).
ControlValidation validate_controls(const HybridModel& model, const EventSchedule& schedule, const Trajectory& traj,
                                    const ValidateConfig& cfg = {});

// Replaces whatever drives `boolean` with the guard sum w_j u_j - 1 >= 0.
void install_guard(ReactionNetwork& net, const std::string& boolean, const std::vector<int>& species,
                   const std::vector<double>& w);

struct ControlReportRow {
    std::string boolean;
    std::vector<std::string> species;
    std::vector<double> weights;  // normalized to max |w| = 1
    double epsilon = 0.0;
    double mismatch_fraction = 0.0;
};

std::vector<double> normalize_weights(const std::vector<double>& w);
void write_control_report(std::ostream& out, const std::vector<ControlReportRow>& rows, const std::string& header = {});

}  // namespace pwh
