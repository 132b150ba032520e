#include "pwh/events.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pwh/model_io.hpp"

namespace pwh {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::GkInequation: return "v1>v2";
        case Provenance::MmInequation: return "X>k_m";
        default: return "manual";
    }
}

Provenance provenance_from_name(const std::string& s) {
    if (s == "v1>v2") return Provenance::GkInequation;
    if (s == "X>k_m") return Provenance::MmInequation;
    if (s == "manual") return Provenance::Manual;
    throw std::runtime_error("unknown provenance '" + s + "'");
}

std::string switching_name(Switching s) {
    switch (s) {
        case Switching::AlwaysOn: return "AlwaysOn";
        case Switching::AlwaysOff: return "AlwaysOff";
        default: return "Switching";
    }
}

bool Inequation::structurally_equal(const Inequation& o) const {
    return provenance == o.provenance && lhs.structurally_equal(o.lhs) && rhs.structurally_equal(o.rhs);
}

std::vector<int> Inequation::parameters() const {
    auto out = lhs.parameters();
    for (int q : rhs.parameters())
        if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    return out;
}

std::vector<double> BooleanSchedule::switch_times() const {
    std::vector<double> out;
    for (size_t k = 1; k < intervals.size(); ++k) out.push_back(intervals[k].t_start);
    return out;
}

int BooleanSchedule::value_at(double t) const {
    for (size_t k = intervals.size(); k-- > 0;)
        if (t >= intervals[k].t_start) return intervals[k].value;
    return intervals.empty() ? 0 : intervals.front().value;
}

namespace {

double median_abs(const std::vector<double>& v) {
    std::vector<double> a(v.size());
    std::transform(v.begin(), v.end(), a.begin(), [](double x) { return std::abs(x); });
    if (a.empty()) return 0.0;
    auto mid = a.begin() + a.size() / 2;
    std::nth_element(a.begin(), mid, a.end());
    return *mid;
}

// Indices of interior local maxima with their topographic prominence.
std::vector<std::pair<size_t, double>> peaks_with_prominence(const std::vector<double>& d) {
    std::vector<std::pair<size_t, double>> out;
    const size_t n = d.size();
    size_t i = 1;
    while (i + 1 < n) {
        if (d[i] > d[i - 1]) {
            // Walk over a plateau.
            size_t j = i;
            while (j + 1 < n && d[j + 1] == d[i]) ++j;
            if (j + 1 < n && d[j + 1] < d[i]) {
                size_t peak = (i + j) / 2;
                double left_min = d[i];
                for (size_t k = i; k-- > 0;) {
                    if (d[k] > d[i]) break;
                    left_min = std::min(left_min, d[k]);
                }
                double right_min = d[i];
                for (size_t k = j + 1; k < n; ++k) {
                    if (d[k] > d[i]) break;
                    right_min = std::min(right_min, d[k]);
                }
                out.push_back({peak, d[i] - std::max(left_min, right_min)});
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace

std::vector<double> series_derivative_extrema(const std::vector<double>& t, const std::vector<double>& y,
                                              const ExtremaConfig& cfg) {
    const size_t n = t.size();
    if (n < 5 || y.size() != n) return {};
    std::vector<double> d(n);
    d[0] = (y[1] - y[0]) / (t[1] - t[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for (size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]);
    double dmax = 0.0;
    for (double x : d) dmax = std::max(dmax, std::abs(x));
    if (dmax == 0.0) return {};
    double threshold = std::max(cfg.prominence_factor * median_abs(d), 1e-9 * dmax);
    std::vector<size_t> idx;
    for (auto [i, prom] : peaks_with_prominence(d))
        if (prom > threshold) idx.push_back(i);
    std::vector<double> neg(n);
    std::transform(d.begin(), d.end(), neg.begin(), [](double x) { return -x; });
    for (auto [i, prom] : peaks_with_prominence(neg))
        if (prom > threshold) idx.push_back(i);
    std::sort(idx.begin(), idx.end());
    std::vector<double> out;
    for (size_t i : idx) out.push_back(t[i]);
    return out;
}

std::vector<double> flux_derivative_extrema(const Trajectory& traj, int reaction, const ExtremaConfig& cfg) {
    if (traj.fluxes.empty()) throw std::invalid_argument("trajectory has no fluxes");
    return series_derivative_extrema(traj.times, traj.flux_series(reaction), cfg);
}

std::optional<Inequation> switching_inequation(const RateLaw& law) {
    if (auto* g = std::get_if<law::GoldbeterKoshland>(&law)) return Inequation{g->v1, g->v2, Provenance::GkInequation};
    if (auto* m = std::get_if<law::MichaelisMenten>(&law)) {
        AffineExpr km;
        km.terms.push_back({Coef{1.0, {m->km}}, -1});
        return Inequation{m->x, km, Provenance::MmInequation};
    }
    return std::nullopt;
}

BooleanSchedule schedule_from_values(const std::string& name, const std::vector<double>& times,
                                     const std::vector<int>& values, Provenance prov) {
    if (times.empty() || times.size() != values.size()) throw std::invalid_argument("schedule: bad series");
    BooleanSchedule s;
    s.name = name;
    s.provenance = prov;
    for (size_t i = 0; i < times.size(); ++i) {
        if (s.intervals.empty() || s.intervals.back().value != values[i]) {
            if (!s.intervals.empty()) s.intervals.back().t_end = times[i];
            s.intervals.push_back({times[i], times.back(), values[i]});
        }
    }
    s.intervals.back().t_end = times.back();
    return s;
}

BooleanSchedule static_schedule(const Trajectory& traj, const ReactionNetwork& net, int reaction,
                                std::span<const double> p) {
    if (reaction < 0 || reaction >= net.n_reactions()) throw std::invalid_argument("reaction index out of range");
    const auto& r = net.reactions[reaction];
    auto ineq = switching_inequation(r.rate);
    if (!ineq) throw ModelError("reaction " + r.name + " has a non-switchable rate law (" + kind_name(r.rate) + ")");
    if (traj.species != net.species) throw std::invalid_argument("trajectory species do not match the network");
    std::vector<int> vals(traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        std::span<const double> u(traj.row(i), traj.n_species());
        vals[i] = ineq->margin(u, p) >= 0.0 ? 1 : 0;
    }
    auto s = schedule_from_values(r.name, traj.times, vals, ineq->provenance);
    s.inequation = ineq;
    s.reactions = {reaction};
    return s;
}

BooleanSchedule static_schedule(const Trajectory& traj, const ReactionNetwork& net, int reaction) {
    auto p = net.parameter_values();
    return static_schedule(traj, net, reaction, p);
}

std::vector<int> expand_schedule(const BooleanSchedule& sch, const std::vector<double>& times) {
    std::vector<int> out(times.size());
    size_t k = 0;
    for (size_t i = 0; i < times.size(); ++i) {
        while (k + 1 < sch.intervals.size() && times[i] >= sch.intervals[k + 1].t_start) ++k;
        out[i] = sch.intervals[k].value;
    }
    return out;
}

Switching classify_switching(const BooleanSchedule& sch) {
    if (sch.intervals.size() > 1) return Switching::Switching;
    if (sch.intervals.empty()) throw std::invalid_argument("empty schedule");
    return sch.intervals.front().value ? Switching::AlwaysOn : Switching::AlwaysOff;
}

EventSchedule dedupe_controls(const std::vector<BooleanSchedule>& schedules) {
    EventSchedule out;
    for (const auto& s : schedules) {
        BooleanSchedule* match = nullptr;
        if (s.inequation)
            for (auto& o : out)
                if (o.inequation && o.inequation->structurally_equal(*s.inequation)) match = &o;
        if (match) {
            for (int r : s.reactions)
                if (std::find(match->reactions.begin(), match->reactions.end(), r) == match->reactions.end())
                    match->reactions.push_back(r);
            continue;
        }
        out.push_back(s);
    }
    for (size_t k = 0; k < out.size(); ++k) out[k].name = "s" + std::to_string(k + 1);
    return out;
}

void write_schedule_csv(std::ostream& out, const EventSchedule& sch, const std::string& header) {
    if (!header.empty()) {
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) out << "# " << l << "\n";
    }
    out << "boolean,t_start,t_end,value,provenance\n";
    for (const auto& s : sch)
        for (const auto& iv : s.intervals)
            out << s.name << "," << format_double(iv.t_start) << "," << format_double(iv.t_end) << "," << iv.value
                << "," << provenance_name(s.provenance) << "\n";
}

EventSchedule read_schedule_csv(std::istream& in) {
    EventSchedule out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line.rfind("boolean,", 0) != 0) throw std::runtime_error("schedule CSV: missing header");
            header = true;
            continue;
        }
        std::vector<std::string> c;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) c.push_back(cell);
        if (c.size() != 5) throw std::runtime_error("schedule CSV: expected 5 columns");
        if (out.empty() || out.back().name != c[0]) {
            out.push_back({});
            out.back().name = c[0];
            out.back().provenance = provenance_from_name(c[4]);
        }
        out.back().intervals.push_back({std::stod(c[1]), std::stod(c[2]), std::stoi(c[3])});
    }
    return out;
}

}  // namespace pwh
