#include "pwh/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "pwh/model_io.hpp"

namespace pwh {

SimulationError::SimulationError(const std::string& msg, double t)
    : std::runtime_error(msg + " at t=" + format_double(t)), time_(t) {}

ZenoError::ZenoError(const std::string& guard, double t)
    : SimulationError("too many events from guard '" + guard + "'", t) {}

void IntegratorConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("integrator tolerances must be positive");
    if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
    if (!(event_tol > 0.0)) throw std::invalid_argument("event_tol must be positive");
    if (min_dwell < 0.0) throw std::invalid_argument("min_dwell must be nonnegative");
}

std::vector<double> Trajectory::species_series(size_t k) const {
    std::vector<double> v(size());
    for (size_t i = 0; i < size(); ++i) v[i] = state(i, k);
    return v;
}

std::vector<double> Trajectory::flux_series(size_t r) const {
    std::vector<double> v(size());
    for (size_t i = 0; i < size(); ++i) v[i] = flux(i, r);
    return v;
}

int Trajectory::species_index(const std::string& name) const {
    auto it = std::find(species.begin(), species.end(), name);
    return it == species.end() ? -1 : static_cast<int>(it - species.begin());
}

int Trajectory::reaction_index(const std::string& name) const {
    auto it = std::find(reactions.begin(), reactions.end(), name);
    return it == reactions.end() ? -1 : static_cast<int>(it - reactions.begin());
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

class Engine {
public:
    Engine(const ReactionNetwork& net, std::span<const double> p, const IntegratorConfig& cfg)
        : net_(net), p_(p), cfg_(cfg), n_(net.n_species()), guards_(compile_guards(net, p)) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &r1_, &r2_, &r3_, &r4_, &r5_})
            v->assign(n_, 0.0);
        for (const auto& sch : net.schedules)
            for (int q : sch.times) toggles_.push_back({p[q], sch.boolean});
        std::stable_sort(toggles_.begin(), toggles_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        jump_of_guard_.assign(guards_.size(), -1);
        for (size_t j = 0; j < net.jumps.size(); ++j) jump_of_guard_[net.jumps[j].guard] = static_cast<int>(j);
    }

    Trajectory run(std::vector<double> u, double t0, double t1, const std::vector<double>* out_times,
                   const std::vector<int>* s0) {
        cfg_.validate();
        if (static_cast<int>(u.size()) != n_) throw std::invalid_argument("initial state size mismatch");
        for (double x : u)
            if (!std::isfinite(x)) throw SimulationError("non-finite initial state", t0);
        if (!(t1 > t0)) throw std::invalid_argument("empty time span");

        traj_ = Trajectory{};
        traj_.species = net_.species;
        for (const auto& r : net_.reactions) traj_.reactions.push_back(r.name);
        traj_.booleans = net_.booleans;

        // Output grid.
        if (out_times) {
            grid_ = *out_times;
        } else if (cfg_.dense_output && cfg_.output_dt > 0.0) {
            long n = static_cast<long>(std::floor((t1 - t0) / cfg_.output_dt + 1e-9));
            for (long i = 0; i <= n; ++i) grid_.push_back(t0 + i * cfg_.output_dt);
            if (t1 - grid_.back() > 1e-9 * cfg_.output_dt) grid_.push_back(t1);
        }
        next_out_ = 0;
        while (next_out_ < grid_.size() && grid_[next_out_] < t0) ++next_out_;

        // Initial modes, recomputed from guards and schedules.
        s_.assign(net_.n_booleans(), 0);
        gbits_ = eval_guards(guards_, u);
        for (size_t g = 0; g < guards_.size(); ++g)
            for (int b : net_.guards[g].controls) s_[b] = gbits_[g];
        for (const auto& sch : net_.schedules) s_[sch.boolean] = sch.initial;
        next_toggle_ = 0;
        while (next_toggle_ < toggles_.size() && toggles_[next_toggle_].first <= t0) {
            s_[toggles_[next_toggle_].second] ^= 1;
            ++next_toggle_;
        }
        if (s0 && *s0 != s_) ++traj_.stats.s0_corrections;
        dwell_until_.assign(guards_.size(), -std::numeric_limits<double>::infinity());
        recent_.assign(guards_.size(), {});

        double t = t0;
        if (grid_.empty()) record(t, u);
        emit_upto(t, u, nullptr, t, true);
        f(u, k1_);
        double hmax = std::min(cfg_.max_step, t1 - t0);
        double h = initial_step(t, u, hmax);
        std::deque<int> window;
        int window_rejects = 0;

        while (t < t1) {
            if (traj_.stats.steps + traj_.stats.rejected > cfg_.max_steps)
                throw SimulationError("step budget exhausted", t);
            double t_stop = t1;
            if (next_toggle_ < toggles_.size()) t_stop = std::min(t_stop, toggles_[next_toggle_].first);
            bool hits_stop = false;
            h = std::min(h, hmax);
            if (t + h >= t_stop || t_stop - (t + h) < 1e-12 * std::max(1.0, std::abs(t))) {
                h = t_stop - t;
                hits_stop = true;
            }
            if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
                if (hits_stop) {
                    t = t_stop;
                    after_stop(t, u);
                    continue;
                }
                throw SimulationError("step size underflow", t);
            }

            double err = attempt(t, u, h);
            bool ok = err <= 1.0 && std::isfinite(err);
            window.push_back(ok ? 0 : 1);
            window_rejects += ok ? 0 : 1;
            if (window.size() > 50) {
                window_rejects -= window.front();
                window.pop_front();
            }
            if (window.size() == 50 && window_rejects >= 25) {
                // Step size oscillating at the stability boundary.
                hmax = std::max(0.5 * h, 1e-12 * std::max(1.0, std::abs(t)));
                ++traj_.stats.max_step_reductions;
                window.clear();
                window_rejects = 0;
            }
            if (!ok) {
                ++traj_.stats.rejected;
                double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
                h *= fac;
                if (h < 1e-14 * std::max(1.0, std::abs(t))) throw SimulationError("step size underflow", t);
                continue;
            }
            ++traj_.stats.steps;
            for (double x : ynew_) {
                if (!std::isfinite(x)) throw SimulationError("non-finite state", t + h);
                if (std::abs(x) > cfg_.divergence_bound) throw SimulationError("state diverged", t + h);
            }
            double t_new = hits_stop ? t_stop : t + h;
            prepare_dense(u, h);
            double h_next = h * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));

            if (guard_changed(t_new, ynew_)) {
                double lo = t, hi = t_new;
                std::vector<double> ui(n_);
                while (hi - lo > cfg_.event_tol * std::max(1.0, std::abs(hi))) {
                    double mid = 0.5 * (lo + hi);
                    interp(t, h, mid, ui);
                    if (guard_changed(mid, ui))
                        hi = mid;
                    else
                        lo = mid;
                }
                interp(t, h, hi, ui);
                emit_upto(hi, u, &ui, t, false, h);
                fire_guards(hi, ui);
                t = hi;
                u = ui;
                if (grid_.empty()) record(t, u);
                f(u, k1_);
                h = h_next;
                continue;
            }

            emit_upto(t_new, u, &ynew_, t, false, h);
            t = t_new;
            u = ynew_;
            k1_.swap(k7_);
            if (hits_stop) after_stop(t, u);
            if (grid_.empty() && t < t1) record(t, u);
            h = h_next;
        }
        emit_upto(t1, u, nullptr, t1, true);
        if (grid_.empty() && traj_.times.back() < t1) record(t1, u);
        return std::move(traj_);
    }

private:
    void f(const std::vector<double>& u, std::vector<double>& du) {
        ++traj_.stats.rhs_evals;
        rhs(net_, u, s_, p_, du);
    }

    double initial_step(double t, const std::vector<double>& u, double hmax) {
        double d0 = 0, d1 = 0;
        for (int i = 0; i < n_; ++i) {
            double sc = cfg_.atol + cfg_.rtol * std::abs(u[i]);
            d0 += (u[i] / sc) * (u[i] / sc);
            d1 += (k1_[i] / sc) * (k1_[i] / sc);
        }
        d0 = std::sqrt(d0 / n_);
        d1 = std::sqrt(d1 / n_);
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        (void)t;
        return std::min(h, hmax);
    }

    // One DP5 trial step; fills ynew_ and k2..k7, returns the scaled error norm.
    double attempt(double t, const std::vector<double>& u, double h) {
        (void)t;
        auto stage = [&](auto coeffs, std::vector<double>& out) {
            for (int i = 0; i < n_; ++i) ytmp_[i] = u[i] + h * coeffs(i);
            f(ytmp_, out);
        };
        stage([&](int i) { return a21 * k1_[i]; }, k2_);
        stage([&](int i) { return a31 * k1_[i] + a32 * k2_[i]; }, k3_);
        stage([&](int i) { return a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]; }, k4_);
        stage([&](int i) { return a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]; }, k5_);
        stage([&](int i) { return a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]; }, k6_);
        for (int i = 0; i < n_; ++i)
            ynew_[i] = u[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
        f(ynew_, k7_);
        double err = 0.0;
        for (int i = 0; i < n_; ++i) {
            double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
            double sc = cfg_.atol + cfg_.rtol * std::max(std::abs(u[i]), std::abs(ynew_[i]));
            err += (e / sc) * (e / sc);
        }
        return std::sqrt(err / n_);
    }

    void prepare_dense(const std::vector<double>& u, double h) {
        for (int i = 0; i < n_; ++i) {
            double dy = ynew_[i] - u[i];
            double bspl = h * k1_[i] - dy;
            r1_[i] = u[i];
            r2_[i] = dy;
            r3_[i] = bspl;
            r4_[i] = dy - h * k7_[i] - bspl;
            r5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
        }
    }

    void interp(double t, double h, double tau, std::vector<double>& out) const {
        double th = (tau - t) / h;
        double th1 = 1.0 - th;
        for (int i = 0; i < n_; ++i)
            out[i] = r1_[i] + th * (r2_[i] + th1 * (r3_[i] + th * (r4_[i] + th1 * r5_[i])));
    }

    bool guard_changed(double tau, const std::vector<double>& u) const {
        for (size_t g = 0; g < guards_.size(); ++g) {
            if (dwell_until_[g] > tau) continue;
            if (static_cast<int>(guards_[g].bit(u)) != gbits_[g]) return true;
        }
        return false;
    }

    void fire_guards(double tau, std::vector<double>& u) {
        std::vector<int> bits(guards_.size());
        std::vector<size_t> fired;
        for (size_t g = 0; g < guards_.size(); ++g) {
            bits[g] = guards_[g].bit(u);
            if (dwell_until_[g] <= tau && bits[g] != gbits_[g]) fired.push_back(g);
        }
        for (size_t g : fired) {
            gbits_[g] = bits[g];
            for (int b : net_.guards[g].controls) s_[b] = bits[g];
            Event ev{tau, static_cast<int>(g), -1, bits[g] ? 1 : -1, false, net_.guards[g].name, {}, {}};
            if (int j = jump_of_guard_[g]; j >= 0) {
                const auto& rule = net_.jumps[j];
                const auto& map = bits[g] ? rule.up : rule.down;
                if (!map.empty()) {
                    ev.pre = u;
                    apply_jump(map, u);
                    ev.post = u;
                    ev.jumped = true;
                }
            }
            traj_.events.push_back(ev);
            dwell_until_[g] = tau + cfg_.min_dwell;
            auto& q = recent_[g];
            q.push_back(tau);
            while (!q.empty() && q.front() < tau - 1.0) q.pop_front();
            if (static_cast<double>(q.size()) > cfg_.max_events_per_time)
                throw ZenoError(net_.guards[g].name, tau);
        }
        // A jump can move other guards across their thresholds; their bits
        // are picked up on the next step.
    }

    void after_stop(double t, std::vector<double>& u) {
        bool toggled = false;
        while (next_toggle_ < toggles_.size() && toggles_[next_toggle_].first <= t) {
            int b = toggles_[next_toggle_].second;
            s_[b] ^= 1;
            traj_.events.push_back({t, -1, b, s_[b] ? 1 : -1, false, net_.booleans[b], {}, {}});
            ++next_toggle_;
            toggled = true;
        }
        if (toggled) {
            emit_upto(t, u, nullptr, t, true);
            f(u, k1_);
        }
    }

    // Records grid outputs strictly before `upto` (or up to and including it
    // when `inclusive`), interpolating inside the current step [t, t+h].
    void emit_upto(double upto, const std::vector<double>& u0, const std::vector<double>* u1, double t, bool inclusive,
                   double h = 0.0) {
        std::vector<double> ui(n_);
        while (next_out_ < grid_.size()) {
            double to = grid_[next_out_];
            if (inclusive ? to > upto : to >= upto) break;
            if (u1 == nullptr || h == 0.0) {
                record(to, u0);
            } else {
                interp(t, h, to, ui);
                record(to, ui);
            }
            ++next_out_;
        }
        (void)u1;
    }

    void record(double t, const std::vector<double>& u) {
        traj_.times.push_back(t);
        traj_.states.insert(traj_.states.end(), u.begin(), u.end());
        if (cfg_.record_fluxes) {
            std::vector<double> fl(net_.n_reactions());
            eval_fluxes(net_, u, s_, p_, fl);
            traj_.fluxes.insert(traj_.fluxes.end(), fl.begin(), fl.end());
        }
        traj_.modes.insert(traj_.modes.end(), s_.begin(), s_.end());
    }

    const ReactionNetwork& net_;
    std::span<const double> p_;
    IntegratorConfig cfg_;
    int n_;
    std::vector<CompiledGuard> guards_;
    std::vector<int> jump_of_guard_;
    std::vector<std::pair<double, int>> toggles_;
    size_t next_toggle_ = 0;
    std::vector<double> grid_;
    size_t next_out_ = 0;
    std::vector<int> s_;
    std::vector<int> gbits_;
    std::vector<double> dwell_until_;
    std::vector<std::deque<double>> recent_;
    std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, r1_, r2_, r3_, r4_, r5_;
    Trajectory traj_;
};

}  // namespace

Trajectory integrate(const ReactionNetwork& net, std::span<const double> p, std::vector<double> u0, double t0,
                     double t1, const IntegratorConfig& cfg, const std::vector<double>* out_times) {
    Engine eng(net, p, cfg);
    return eng.run(std::move(u0), t0, t1, out_times, nullptr);
}

Trajectory integrate_smooth(const ReactionNetwork& net, const std::vector<double>& u0, double t0, double t1,
                            const IntegratorConfig& cfg) {
    for (double x : u0)
        if (x < 0.0) throw std::invalid_argument("initial state must be nonnegative");
    auto p = net.parameter_values();
    return integrate(net, p, u0, t0, t1, cfg);
}

Trajectory integrate_hybrid(const HybridModel& model, const std::vector<double>& u0, const std::vector<int>& s0,
                            double t0, double t1, const IntegratorConfig& cfg) {
    auto p = model.network().parameter_values();
    Engine eng(model.network(), p, cfg);
    return eng.run(u0, t0, t1, nullptr, &s0);
}

namespace {
double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace

std::optional<double> detect_period(const Trajectory& traj) {
    std::vector<double> jumps;
    for (const auto& e : traj.events)
        if (e.jumped) jumps.push_back(e.t);
    if (jumps.size() >= 3) {
        std::vector<double> d;
        for (size_t i = 1; i < jumps.size(); ++i) d.push_back(jumps[i] - jumps[i - 1]);
        return median(d);
    }
    if (traj.size() < 5) return std::nullopt;
    int best = -1;
    double best_swing = 0.0;
    for (size_t k = 0; k < traj.n_species(); ++k) {
        auto x = traj.species_series(k);
        auto [mn, mx] = std::minmax_element(x.begin(), x.end());
        double scale = std::max(std::abs(*mx), std::abs(*mn));
        if (scale <= 0.0) continue;
        double swing = (*mx - *mn) / scale;
        if (swing > best_swing + 1e-12) {
            best_swing = swing;
            best = static_cast<int>(k);
        }
    }
    if (best < 0 || best_swing < 1e-9) return std::nullopt;
    auto x = traj.species_series(best);
    auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    double mid = 0.5 * (*mn + *mx);
    double band = 0.05 * (*mx - *mn);
    std::vector<double> ups;
    bool armed = false;
    for (size_t i = 1; i < x.size(); ++i) {
        if (x[i - 1] < mid - band) armed = true;
        if (armed && x[i - 1] < mid && x[i] >= mid) {
            double a = (mid - x[i - 1]) / (x[i] - x[i - 1]);
            ups.push_back(traj.times[i - 1] + a * (traj.times[i] - traj.times[i - 1]));
            armed = false;
        }
    }
    if (ups.size() < 3) return std::nullopt;
    std::vector<double> d;
    for (size_t i = 1; i < ups.size(); ++i) d.push_back(ups[i] - ups[i - 1]);
    return median(d);
}

namespace {
void write_header(std::ostream& out, const std::string& header) {
    if (header.empty()) return;
    std::istringstream hs(header);
    std::string l;
    while (std::getline(hs, l)) out << "# " << l << "\n";
}
}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::string& header) {
    write_header(out, header);
    out << "t";
    for (const auto& s : traj.species) out << "," << s;
    bool fl = !traj.fluxes.empty();
    if (fl)
        for (const auto& r : traj.reactions) out << ",flux:" << r;
    out << "\n";
    for (size_t i = 0; i < traj.size(); ++i) {
        out << format_double(traj.times[i]);
        for (size_t k = 0; k < traj.n_species(); ++k) out << "," << format_double(traj.state(i, k));
        if (fl)
            for (size_t r = 0; r < traj.n_reactions(); ++r) out << "," << format_double(traj.flux(i, r));
        out << "\n";
    }
}

void write_events_csv(std::ostream& out, const Trajectory& traj, const std::string& header) {
    write_header(out, header);
    out << "t,guard,direction\n";
    for (const auto& e : traj.events) out << format_double(e.t) << "," << e.source << "," << e.direction << "\n";
}

Trajectory read_trajectory_csv(std::istream& in) {
    Trajectory traj;
    std::string line;
    bool have_header = false;
    int line_no = 0;
    std::vector<int> kind;  // 0 species, 1 flux
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            if (cells.empty() || cells[0] != "t") throw std::runtime_error("trajectory CSV must start with column 't'");
            for (size_t c = 1; c < cells.size(); ++c) {
                if (cells[c].rfind("flux:", 0) == 0) {
                    traj.reactions.push_back(cells[c].substr(5));
                    kind.push_back(1);
                } else {
                    if (!traj.reactions.empty()) throw std::runtime_error("species columns must precede flux columns");
                    traj.species.push_back(cells[c]);
                    kind.push_back(0);
                }
            }
            have_header = true;
            continue;
        }
        if (cells.size() != kind.size() + 1)
            throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": wrong column count");
        std::vector<double> vals(cells.size());
        for (size_t c = 0; c < cells.size(); ++c) {
            try {
                size_t used = 0;
                vals[c] = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": bad number");
            }
        }
        if (!traj.times.empty() && vals[0] <= traj.times.back())
            throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": time not increasing");
        traj.times.push_back(vals[0]);
        for (size_t c = 1; c < vals.size(); ++c) (kind[c - 1] ? traj.fluxes : traj.states).push_back(vals[c]);
    }
    if (!have_header) throw std::runtime_error("empty trajectory CSV");
    return traj;
}

void save_trajectory(const std::string& path, const Trajectory& traj, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_trajectory_csv(out, traj, header);
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory " + path);
    return read_trajectory_csv(in);
}

}  // namespace pwh
