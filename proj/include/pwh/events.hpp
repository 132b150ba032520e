#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pwh/network.hpp"
#include "pwh/simulate.hpp"

namespace pwh {

enum class Provenance { GkInequation, MmInequation, Manual };
std::string provenance_name(Provenance p);  // "v1>v2", "X>k_m", "manual"
Provenance provenance_from_name(const std::string& s);

// lhs >= rhs, evaluated with H(0) = 1.
struct Inequation {
    AffineExpr lhs;
    AffineExpr rhs;
    Provenance provenance = Provenance::Manual;

    double margin(std::span<const double> u, std::span<const double> p) const {
        return lhs.eval(u, p) - rhs.eval(u, p);
    }
    bool structurally_equal(const Inequation& o) const;
    std::vector<int> parameters() const;
};

struct Interval {
    double t_start = 0.0;
    double t_end = 0.0;
    int value = 0;
};

struct BooleanSchedule {
    std::string name;
    std::vector<Interval> intervals;  // [t_start, t_end), the last one closed at the span end
    Provenance provenance = Provenance::Manual;
    std::optional<Inequation> inequation;
    std::vector<int> reactions;

    std::vector<double> switch_times() const;
    int value_at(double t) const;
};

using EventSchedule = std::vector<BooleanSchedule>;

enum class Switching { AlwaysOn, AlwaysOff, Switching };
std::string switching_name(Switching s);

struct ExtremaConfig {
    double prominence_factor = 5.0;  // times the median |dR/dt|
};

// Times of prominent local extrema of dR/dt for one reaction's flux series.
std::vector<double> flux_derivative_extrema(const Trajectory& traj, int reaction, const ExtremaConfig& cfg = {});
std::vector<double> series_derivative_extrema(const std::vector<double>& t, const std::vector<double>& y,
                                              const ExtremaConfig& cfg = {});

// v1 >= v2 for GK laws, X >= k_m for MM laws; none for other kinds.
std::optional<Inequation> switching_inequation(const RateLaw& law);

// Pointwise inequation values compressed into alternating intervals.
BooleanSchedule schedule_from_values(const std::string& name, const std::vector<double>& times,
                                     const std::vector<int>& values, Provenance prov);

// Throws ModelError for reactions that are neither GK nor MM.
BooleanSchedule static_schedule(const Trajectory& traj, const ReactionNetwork& net, int reaction);
BooleanSchedule static_schedule(const Trajectory& traj, const ReactionNetwork& net, int reaction,
                                std::span<const double> p);

std::vector<int> expand_schedule(const BooleanSchedule& sch, const std::vector<double>& times);

Switching classify_switching(const BooleanSchedule& sch);

// Merges schedules whose inequations are structurally identical and names
// the survivors s1, s2, ... in order of first appearance.
EventSchedule dedupe_controls(const std::vector<BooleanSchedule>& schedules);

void write_schedule_csv(std::ostream& out, const EventSchedule& sch, const std::string& header = {});
// Inequations and reaction lists are not stored in the CSV.
EventSchedule read_schedule_csv(std::istream& in);

}  // namespace pwh
