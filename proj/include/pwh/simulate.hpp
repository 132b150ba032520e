#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwh/network.hpp"

namespace pwh {

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& msg, double t);
    double time() const { return time_; }

private:
    double time_;
};

// Raised when a guard fires more often than the configured rate.
class ZenoError : public SimulationError {
public:
    ZenoError(const std::string& guard, double t);
};

struct IntegratorConfig {
    double rtol = 1e-6;
    double atol = 1e-9;
    double max_step = std::numeric_limits<double>::infinity();
    double output_dt = 0.1;
    bool dense_output = true;  // false: record every accepted step instead of a grid
    double min_dwell = 1e-6;
    double event_tol = 1e-9;  // relative time
    double max_events_per_time = 1000.0;
    long max_steps = 5'000'000;
    double divergence_bound = 1e12;
    bool record_fluxes = true;
    void validate() const;
};

struct Event {
    double t = 0.0;
    int guard = -1;      // guard index, or -1 for a schedule toggle
    int boolean = -1;    // for schedule toggles
    int direction = 0;   // +1: 0 -> 1, -1: 1 -> 0
    bool jumped = false;
    std::string source;  // guard or boolean name
    std::vector<double> pre, post;  // state around a jump, when jumped
};

struct IntegratorStats {
    long steps = 0;
    long rejected = 0;
    long rhs_evals = 0;
    long max_step_reductions = 0;
    long s0_corrections = 0;
};

struct Trajectory {
    std::vector<std::string> species;
    std::vector<std::string> reactions;
    std::vector<std::string> booleans;
    std::vector<double> times;
    std::vector<double> states;  // row-major, times x species
    std::vector<double> fluxes;  // row-major, times x reactions
    std::vector<int> modes;      // row-major, times x booleans
    std::vector<Event> events;
    IntegratorStats stats;

    size_t size() const { return times.size(); }
    size_t n_species() const { return species.size(); }
    size_t n_reactions() const { return reactions.size(); }
    double state(size_t i, size_t k) const { return states[i * species.size() + k]; }
    double flux(size_t i, size_t r) const { return fluxes[i * reactions.size() + r]; }
    const double* row(size_t i) const { return states.data() + i * species.size(); }
    std::vector<double> species_series(size_t k) const;
    std::vector<double> flux_series(size_t r) const;
    int species_index(const std::string& name) const;
    int reaction_index(const std::string& name) const;
};

// Core engine: any rate laws, guards, jumps and schedules, with parameters p.
Trajectory integrate(const ReactionNetwork& net, std::span<const double> p, std::vector<double> u0, double t0,
                     double t1, const IntegratorConfig& cfg, const std::vector<double>* out_times = nullptr);

Trajectory integrate_smooth(const ReactionNetwork& net, const std::vector<double>& u0, double t0, double t1,
                            const IntegratorConfig& cfg);

// s0 is checked against the guards and replaced by the guard values.
Trajectory integrate_hybrid(const HybridModel& model, const std::vector<double>& u0, const std::vector<int>& s0,
                            double t0, double t1, const IntegratorConfig& cfg);

// Median interval between jump events when there are at least three,
// otherwise the median interval between mid-range up-crossings of the
// species with the largest relative swing.
std::optional<double> detect_period(const Trajectory& traj);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::string& header = {});
void write_events_csv(std::ostream& out, const Trajectory& traj, const std::string& header = {});
Trajectory read_trajectory_csv(std::istream& in);
void save_trajectory(const std::string& path, const Trajectory& traj, const std::string& header = {});
Trajectory load_trajectory(const std::string& path);

}  // namespace pwh
