#include "pwh/mode_control.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "pwh/fit.hpp"
#include "pwh/model_io.hpp"

namespace pwh {

std::vector<size_t> control_samples(const Trajectory& traj, const BooleanSchedule& sch, const ControlLpConfig& cfg) {
    const size_t n = traj.size();
    if (n == 0) throw std::invalid_argument("control LP: empty trajectory");
    if (sch.intervals.empty()) throw std::invalid_argument("control LP: empty schedule");
    const double t0 = traj.times.front(), t1 = traj.times.back();
    const double tol = 1e-9 * std::max(1.0, std::abs(t1 - t0));
    if (sch.intervals.front().t_start > t0 + tol || sch.intervals.back().t_end < t1 - tol)
        throw std::invalid_argument("control LP: schedule " + sch.name + " does not cover the trajectory");
    std::vector<char> keep(n, 0);
    const size_t stride = static_cast<size_t>(std::max(cfg.stride, 1));
    for (size_t i = 0; i < n; i += stride) keep[i] = 1;
    for (double ts : sch.switch_times()) {
        const size_t is = std::lower_bound(traj.times.begin(), traj.times.end(), ts) - traj.times.begin();
        const long k = cfg.exclude_steps;
        for (long i = static_cast<long>(is) - k; i <= static_cast<long>(is) + k; ++i)
            if (i >= 0 && i < static_cast<long>(n)) keep[i] = 0;
    }
    // Every interval keeps at least one sample.
    auto vals = expand_schedule(sch, traj.times);
    for (const auto& iv : sch.intervals) {
        size_t a = std::lower_bound(traj.times.begin(), traj.times.end(), iv.t_start) - traj.times.begin();
        size_t b = std::lower_bound(traj.times.begin(), traj.times.end(), iv.t_end) - traj.times.begin();
        if (&iv == &sch.intervals.back()) b = n;
        if (a >= b) continue;
        bool any = false;
        for (size_t i = a; i < b && !any; ++i) any = keep[i] && vals[i] == iv.value;
        if (!any) keep[(a + b - 1) / 2] = 1;
    }
    std::vector<size_t> out;
    for (size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(i);
    return out;
}

ControlLP build_control_lp(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& candidates,
                           const ControlLpConfig& cfg) {
    if (candidates.empty()) throw std::invalid_argument("control LP: empty candidate set for " + sch.name);
    for (int k : candidates)
        if (k < 0 || k >= static_cast<int>(traj.n_species()))
            throw std::invalid_argument("control LP: candidate species index out of range");
    ControlLP lp;
    lp.species = candidates;
    lp.margin = cfg.margin * cfg.state_scale;
    lp.epsilon_bound = cfg.epsilon_bound * cfg.state_scale;
    auto vals = expand_schedule(sch, traj.times);
    std::set<std::vector<double>> seen;
    for (size_t i : control_samples(traj, sch, cfg)) {
        const double s = vals[i] ? 1.0 : -1.0;
        std::vector<double> row;
        row.reserve(candidates.size() + 1);
        for (int k : candidates) row.push_back(s * traj.state(i, k));
        row.push_back(s);
        if (!seen.insert(row).second) continue;
        row.pop_back();
        lp.rows.push_back(std::move(row));
        lp.signs.push_back(s);
    }
    return lp;
}

Lp control_lp_primal(const ControlLP& lp) {
    const size_t n = lp.species.size();
    Lp out;
    out.c.assign(n + 1, 0.0);
    out.c[n] = 1.0;
    const double inf = std::numeric_limits<double>::infinity();
    out.lower.assign(n + 1, -inf);
    out.upper.assign(n + 1, inf);
    out.lower[n] = -lp.epsilon_bound;
    out.upper[n] = lp.epsilon_bound;
    for (size_t l = 0; l < lp.rows.size(); ++l) {
        auto row = lp.rows[l];
        row.push_back(1.0);
        out.rows.push_back(std::move(row));
        out.b.push_back(lp.margin + lp.signs[l]);
    }
    return out;
}

ControlSolution solve_control_lp(const ControlLP& lp) {
    const int n = static_cast<int>(lp.species.size());
    const int L = static_cast<int>(lp.rows.size());
    const double E = lp.epsilon_bound;
    // Dual: max sum b_l y_l - E (alpha + beta)
    //   s.t. sum y_l a_l = 0, sum y_l + alpha - beta = 1, y, alpha, beta >= 0.
    StandardLp d;
    d.m = n + 1;
    d.n = L + 2;
    d.A.assign(static_cast<size_t>(d.m) * d.n, 0.0);
    d.b.assign(d.m, 0.0);
    d.b[n] = 1.0;
    d.c.assign(d.n, 0.0);
    for (int l = 0; l < L; ++l) {
        for (int j = 0; j < n; ++j) d.A[static_cast<size_t>(j) * d.n + l] = lp.rows[l][j];
        d.A[static_cast<size_t>(n) * d.n + l] = 1.0;
        d.c[l] = -(lp.margin + lp.signs[l]);
    }
    d.A[static_cast<size_t>(n) * d.n + L] = 1.0;
    d.A[static_cast<size_t>(n) * d.n + L + 1] = -1.0;
    d.c[L] = E;
    d.c[L + 1] = E;

    auto r = solve_standard(d);
    ControlSolution out;
    out.iterations = r.iterations;
    out.diagnostics = r.diagnostics;
    if (r.status == LpStatus::Optimal) {
        out.status = LpStatus::Optimal;
        out.w.resize(n);
        for (int j = 0; j < n; ++j) out.w[j] = -r.duals[j];
        out.epsilon = std::clamp(-r.duals[n], -E, E);
        out.clamped = out.epsilon <= -E + 1e-9 * std::max(1.0, E);
    } else if (r.status == LpStatus::Infeasible || r.status == LpStatus::Unbounded) {
        // The relaxed primal is always feasible and bounded; this is a solver fault.
        out.status = LpStatus::NumericalFailure;
        out.diagnostics = "internal error: dual reported " + lp_status_name(r.status) + "; " + r.diagnostics;
    } else {
        out.status = r.status;
    }
    return out;
}

namespace {

struct Scored {
    std::uint64_t mask = 0;
    double score = std::numeric_limits<double>::infinity();
};

bool better(const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    int pa = std::popcount(a.mask), pb = std::popcount(b.mask);
    if (pa != pb) return pa < pb;
    return a.mask < b.mask;
}

std::vector<int> subset_of(std::uint64_t mask, const std::vector<int>& pool) {
    std::vector<int> out;
    for (size_t k = 0; k < pool.size(); ++k)
        if (mask >> k & 1ULL) out.push_back(pool[k]);
    return out;
}

class SubsetEvaluator {
public:
    SubsetEvaluator(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& pool,
                    const ControlLpConfig& cfg, double parsimony)
        : traj_(traj), sch_(sch), pool_(pool), cfg_(cfg), parsimony_(parsimony) {}

    // Evaluates all uncached masks, in parallel when threads > 1.
    void evaluate(const std::vector<std::uint64_t>& masks, int threads) {
        std::vector<std::uint64_t> todo;
        for (auto m : masks)
            if (m && !cache_.count(m) && std::find(todo.begin(), todo.end(), m) == todo.end()) todo.push_back(m);
        std::vector<ControlSolution> sols(todo.size());
        auto work = [&](size_t k) {
            sols[k] = solve_control_lp(build_control_lp(traj_, sch_, subset_of(todo[k], pool_), cfg_));
        };
        threads = std::min<int>(threads, static_cast<int>(todo.size()));
        if (threads <= 1) {
            for (size_t k = 0; k < todo.size(); ++k) work(k);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errs(threads);
            for (int w = 0; w < threads; ++w)
                pool.emplace_back([&, w] {
                    try {
                        for (size_t k = w; k < todo.size(); k += threads) work(k);
                    } catch (...) {
                        errs[w] = std::current_exception();
                    }
                });
            for (auto& t : pool) t.join();
            for (auto& e : errs)
                if (e) std::rethrow_exception(e);
        }
        for (size_t k = 0; k < todo.size(); ++k) cache_.emplace(todo[k], std::move(sols[k]));
    }

    Scored score(std::uint64_t mask) const {
        if (!mask) return {mask, std::numeric_limits<double>::infinity()};
        const auto& s = cache_.at(mask);
        double e = s.status == LpStatus::Optimal ? s.epsilon : std::numeric_limits<double>::infinity();
        return {mask, e + parsimony_ * std::popcount(mask)};
    }

    const ControlSolution& solution(std::uint64_t mask) const { return cache_.at(mask); }

private:
    const Trajectory& traj_;
    const BooleanSchedule& sch_;
    const std::vector<int>& pool_;
    ControlLpConfig cfg_;
    double parsimony_;
    std::map<std::uint64_t, ControlSolution> cache_;
};

GaResult make_result(const SubsetEvaluator& ev, const Scored& best, const std::vector<int>& pool) {
    GaResult r;
    r.subset = subset_of(best.mask, pool);
    r.solution = ev.solution(best.mask);
    r.score = best.score;
    return r;
}

}  // namespace

GaResult ga_select_controls(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& pool,
                            const GaConfig& cfg, std::uint64_t seed) {
    const int n = static_cast<int>(pool.size());
    if (n == 0) throw std::invalid_argument("GA: empty species pool");
    if (n > 63) throw std::invalid_argument("GA: species pool larger than 63");
    if (cfg.population < 2 || cfg.generations < 0 || cfg.elitism < 0 || cfg.elitism > cfg.population)
        throw std::invalid_argument("GA: invalid configuration");
    const std::uint64_t full = n == 64 ? ~0ULL : ((1ULL << n) - 1);
    const double pm = cfg.mutation_rate > 0.0 ? cfg.mutation_rate : 1.0 / n;
    const int threads = resolve_threads(cfg.threads);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> pick_bit(0, n - 1);
    std::uniform_int_distribution<int> pick_ind(0, cfg.population - 1);
    auto repair = [&](std::uint64_t m) { return m ? m : (1ULL << pick_bit(rng)); };

    SubsetEvaluator ev(traj, sch, pool, cfg.lp, cfg.parsimony);
    std::vector<std::uint64_t> popn;
    popn.push_back(full);
    while (static_cast<int>(popn.size()) < cfg.population) {
        std::uint64_t m = 0;
        for (int k = 0; k < n; ++k)
            if (u01(rng) < 0.5) m |= 1ULL << k;
        popn.push_back(repair(m));
    }

    GaResult res;
    Scored best;
    auto rank = [&]() {
        ev.evaluate(popn, threads);
        std::vector<Scored> sc;
        for (auto m : popn) sc.push_back(ev.score(m));
        std::stable_sort(sc.begin(), sc.end(), better);
        if (better(sc.front(), best) || best.mask == 0) best = sc.front();
        res.best_history.push_back(best.score);
        return sc;
    };

    auto ranked = rank();
    for (int g = 0; g < cfg.generations; ++g) {
        auto tournament = [&]() {
            const auto& a = ranked[pick_ind(rng)];
            const auto& b = ranked[pick_ind(rng)];
            return better(a, b) ? a.mask : b.mask;
        };
        std::vector<std::uint64_t> next;
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(ranked[e].mask);
        while (static_cast<int>(next.size()) < cfg.population) {
            std::uint64_t p1 = tournament(), p2 = tournament();
            std::uint64_t child = 0;
            for (int k = 0; k < n; ++k) {
                std::uint64_t bit = 1ULL << k;
                child |= (u01(rng) < 0.5 ? p1 : p2) & bit;
                if (u01(rng) < pm) child ^= bit;
            }
            next.push_back(repair(child & full));
        }
        popn = std::move(next);
        ranked = rank();
    }
    auto out = make_result(ev, best, pool);
    out.best_history = std::move(res.best_history);
    return out;
}

GaResult exhaustive_select_controls(const Trajectory& traj, const BooleanSchedule& sch, const std::vector<int>& pool,
                                    const ControlLpConfig& cfg, double parsimony) {
    const int n = static_cast<int>(pool.size());
    if (n == 0) throw std::invalid_argument("exhaustive search: empty species pool");
    if (n > 20) throw std::invalid_argument("exhaustive search: species pool larger than 20");
    SubsetEvaluator ev(traj, sch, pool, cfg, parsimony);
    std::vector<std::uint64_t> masks;
    for (std::uint64_t m = 1; m < (1ULL << n); ++m) masks.push_back(m);
    ev.evaluate(masks, 1);
    Scored best;
    for (auto m : masks) {
        auto s = ev.score(m);
        if (best.mask == 0 || better(s, best)) best = s;
    }
    return make_result(ev, best, pool);
}

ControlValidation validate_controls(const HybridModel& model, const EventSchedule& schedule, const Trajectory& traj,
                                    const ValidateConfig& cfg) {
    const auto& net = model.network();
    if (traj.species != net.species) throw std::invalid_argument("validate: trajectory species do not match the model");
    auto p = net.parameter_values();
    auto guards = compile_guards(net, p);
    auto gmap = boolean_guard_map(net);

    ControlValidation out;
    Trajectory sim;
    if (cfg.simulate && traj.size() >= 2) {
        out.simulated = true;
        std::vector<double> u0(traj.row(0), traj.row(0) + traj.n_species());
        try {
            sim = integrate(net, p, u0, traj.times.front(), traj.times.back(), cfg.integrator, &traj.times);
            double ref_max = 0.0, sim_max = 0.0;
            for (double v : traj.states) ref_max = std::max(ref_max, std::abs(v));
            for (double v : sim.states) sim_max = std::max(sim_max, std::abs(v));
            if (sim.size() != traj.size() || sim_max > cfg.divergence_factor * std::max(ref_max, 1e-12)) {
                out.diverged = true;
                out.diagnostics = "hybrid simulation left the reference range";
            }
        } catch (const SimulationError& e) {
            out.diverged = true;
            out.diagnostics = e.what();
        }
    }

    for (const auto& sch : schedule) {
        BooleanReplay br;
        br.boolean = sch.name;
        const int b = net.boolean_index(sch.name);
        if (b < 0 || gmap[b] < 0) {
            out.diagnostics += (out.diagnostics.empty() ? "" : "; ") + sch.name + " has no guard";
            out.booleans.push_back(br);
            continue;
        }
        const int g = gmap[b];
        auto expected = expand_schedule(sch, traj.times);
        auto samples = control_samples(traj, sch, cfg.lp);
        const bool have_sim = out.simulated && !out.diverged && sim.size() == traj.size();
        for (size_t i : samples) {
            std::span<const double> u(traj.row(i), traj.n_species());
            const int bit = guards[g].bit(u) ? 1 : 0;
            ++br.samples;
            if (bit != expected[i]) ++br.mismatches;
            if (have_sim && sim.modes[i * sim.booleans.size() + b] != expected[i]) ++br.sim_mismatches;
        }
        if (br.samples) {
            br.mismatch_fraction = static_cast<double>(br.mismatches) / br.samples;
            br.sim_mismatch_fraction = static_cast<double>(br.sim_mismatches) / br.samples;
        }
        if (out.simulated && !out.diverged) {
            std::vector<std::pair<double, int>> sim_switches;
            for (const auto& e : sim.events)
                if (e.guard == g) sim_switches.push_back({e.t, e.direction});
            const auto times = sch.switch_times();
            for (size_t k = 0; k < times.size(); ++k) {
                const int dir = sch.intervals[k + 1].value > sch.intervals[k].value ? 1 : -1;
                double shift = std::numeric_limits<double>::quiet_NaN();
                for (auto [t, d] : sim_switches)
                    if (d == dir && (std::isnan(shift) || std::abs(t - times[k]) < std::abs(shift))) shift = t - times[k];
                br.event_shifts.push_back(shift);
            }
        }
        out.booleans.push_back(br);
    }
    return out;
}

void install_guard(ReactionNetwork& net, const std::string& boolean, const std::vector<int>& species,
                   const std::vector<double>& w) {
    const int b = net.boolean_index(boolean);
    if (b < 0) throw ModelError("unknown boolean '" + boolean + "'");
    if (species.size() != w.size()) throw std::invalid_argument("install_guard: species and weights differ in length");
    AffineExpr expr;
    for (size_t k = 0; k < species.size(); ++k) expr.terms.push_back({Coef{w[k], {}}, species[k]});
    expr.terms.push_back({Coef{-1.0, {}}, -1});

    std::erase_if(net.schedules, [&](const TimeSchedule& s) { return s.boolean == b; });
    for (auto& g : net.guards) {
        if (std::find(g.controls.begin(), g.controls.end(), b) == g.controls.end()) continue;
        if (g.controls.size() == 1) {
            g.expr = expr;
            return;
        }
        std::erase(g.controls, b);
    }
    std::string name = "g_" + boolean;
    while (std::any_of(net.guards.begin(), net.guards.end(), [&](const Guard& g) { return g.name == name; }))
        name += "_";
    net.guards.push_back({name, expr, {b}});
}

std::vector<double> normalize_weights(const std::vector<double>& w) {
    double m = 0.0;
    for (double x : w) m = std::max(m, std::abs(x));
    if (m == 0.0) return w;
    std::vector<double> out(w.size());
    for (size_t k = 0; k < w.size(); ++k) out[k] = w[k] / m;
    return out;
}

void write_control_report(std::ostream& out, const std::vector<ControlReportRow>& rows, const std::string& header) {
    if (!header.empty()) {
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) out << "# " << l << "\n";
    }
    out << "boolean,species,weights,epsilon,mismatch_fraction\n";
    for (const auto& r : rows) {
        out << r.boolean << ",";
        for (size_t k = 0; k < r.species.size(); ++k) out << (k ? ";" : "") << r.species[k];
        out << ",";
        for (size_t k = 0; k < r.weights.size(); ++k) out << (k ? ";" : "") << format_double(r.weights[k]);
        out << "," << format_double(r.epsilon) << "," << format_double(r.mismatch_fraction) << "\n";
    }
}

}  // namespace pwh
