#include "pwh/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pwh/model_io.hpp"

namespace pwh {

using json = nlohmann::json;

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Static: return "static";
        case Strategy::Transitions: return "transitions";
        default: return "dynamic";
    }
}

Strategy strategy_from_name(const std::string& s) {
    if (s == "static" || s == "i") return Strategy::Static;
    if (s == "transitions" || s == "ii") return Strategy::Transitions;
    if (s == "dynamic" || s == "iii") return Strategy::Dynamic;
    throw std::invalid_argument("unknown strategy '" + s + "'");
}

std::string param_kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::Rate: return "rate";
        case ParamKind::Threshold: return "threshold";
        case ParamKind::Time: return "time";
        default: return "linear";
    }
}

ParamKind param_kind_from_name(const std::string& s) {
    if (s == "rate") return ParamKind::Rate;
    if (s == "threshold") return ParamKind::Threshold;
    if (s == "time") return ParamKind::Time;
    if (s == "linear") return ParamKind::Linear;
    throw std::invalid_argument("unknown parameter kind '" + s + "'");
}

void FitProblem::validate() const {
    for (const auto& f : layout) {
        if (!std::isfinite(f.lower) || !std::isfinite(f.upper) || !(f.lower < f.upper))
            throw std::invalid_argument("parameter " + f.name + ": bounds must be finite with lower < upper");
        if (model.parameter_index(f.name) < 0) throw std::invalid_argument("parameter " + f.name + " not in model");
    }
    if (reference.size() < 2) throw std::invalid_argument("reference trajectory too short");
}

std::vector<double> FitProblem::initial_vector() const {
    std::vector<double> x;
    for (const auto& f : layout) x.push_back(f.initial);
    return x;
}

double nrms(const std::vector<double>& sim, const std::vector<double>& ref) {
    if (sim.size() != ref.size() || ref.empty()) throw std::invalid_argument("nrms: size mismatch");
    double ss = 0.0;
    for (size_t i = 0; i < ref.size(); ++i) ss += (sim[i] - ref[i]) * (sim[i] - ref[i]);
    auto [mn, mx] = std::minmax_element(ref.begin(), ref.end());
    double range = *mx - *mn;
    if (range <= 0.0) range = std::max(std::abs(*mx), std::abs(*mn));
    if (range <= 0.0) range = 1.0;
    return std::sqrt(ss / ref.size()) / range;
}

CostFunction::CostFunction(const FitProblem& problem) : problem_(problem) {
    problem_.validate();
    const auto& m = problem_.model;
    const auto& ref = problem_.reference;
    for (const auto& f : problem_.layout) param_index_.push_back(m.require_parameter(f.name));
    if (ref.species != m.species) throw std::invalid_argument("reference species do not match the model");
    for (const auto& s : problem_.species_signals) {
        int a = ref.species_index(s), b = m.species_index(s);
        if (a < 0 || b < 0) throw std::invalid_argument("unknown species signal " + s);
        species_ref_.push_back(a);
        species_sim_.push_back(b);
        species_ref_series_.push_back(ref.species_series(a));
    }
    for (const auto& r : problem_.flux_signals) {
        int a = ref.reaction_index(r), b = m.reaction_index(r);
        if (a < 0 || b < 0) throw std::invalid_argument("unknown flux signal " + r);
        if (ref.fluxes.empty()) throw std::invalid_argument("reference trajectory has no fluxes");
        flux_ref_.push_back(a);
        flux_sim_.push_back(b);
        flux_ref_series_.push_back(ref.flux_series(a));
    }
    for (const auto& ts : m.schedules) {
        std::vector<int> pos;
        for (int q : ts.times) {
            auto it = std::find(param_index_.begin(), param_index_.end(), q);
            pos.push_back(it == param_index_.end() ? -1 : static_cast<int>(it - param_index_.begin()));
        }
        schedule_times_.push_back(pos);
    }
    if (problem_.penalty > 0.0) {
        penalty_ = problem_.penalty;
    } else {
        auto c = raw(problem_.initial_vector());
        size_t n_signals = species_ref_.size() + flux_ref_.size();
        penalty_ = c.failed ? 1e3 * std::max<size_t>(n_signals, 1) : 1e3 * std::max(c.value, 1e-9);
    }
}

std::vector<double> CostFunction::parameters(const std::vector<double>& x) const {
    if (x.size() != param_index_.size()) throw std::invalid_argument("parameter vector size mismatch");
    auto p = problem_.model.parameter_values();
    for (size_t k = 0; k < x.size(); ++k) p[param_index_[k]] = x[k];
    return p;
}

Trajectory CostFunction::simulate(const std::vector<double>& x) const {
    auto p = parameters(x);
    const auto& ref = problem_.reference;
    std::vector<double> u0(ref.row(0), ref.row(0) + ref.n_species());
    return integrate(problem_.model, p, u0, ref.times.front(), ref.times.back(), problem_.integrator, &ref.times);
}

CostBreakdown CostFunction::raw(const std::vector<double>& x) const {
    CostBreakdown out;
    for (size_t k = 0; k < x.size(); ++k) {
        const auto& f = problem_.layout[k];
        if (!(x[k] >= f.lower && x[k] <= f.upper)) {
            out.failed = true;
            out.failure = "parameter " + f.name + " out of bounds";
            return out;
        }
    }
    auto p = parameters(x);
    const auto& m = problem_.model;
    const double t0 = problem_.reference.times.front(), t1 = problem_.reference.times.back();
    for (size_t s = 0; s < m.schedules.size(); ++s) {
        const auto& ts = m.schedules[s];
        for (size_t k = 0; k < ts.times.size(); ++k) {
            double t = p[ts.times[k]];
            if ((k > 0 && !(t > p[ts.times[k - 1]])) || t <= t0 || t >= t1) {
                out.failed = true;
                out.failure = "transition times out of order";
                return out;
            }
        }
    }
    Trajectory sim;
    try {
        sim = simulate(x);
    } catch (const SimulationError& e) {
        out.failed = true;
        out.failure = e.what();
        return out;
    } catch (const ModelError& e) {
        out.failed = true;
        out.failure = e.what();
        return out;
    }
    if (sim.size() != problem_.reference.size()) {
        out.failed = true;
        out.failure = "simulation grid mismatch";
        return out;
    }
    double total = 0.0;
    for (size_t k = 0; k < species_sim_.size(); ++k) {
        double e = nrms(sim.species_series(species_sim_[k]), species_ref_series_[k]);
        out.species_nrms.push_back(e);
        total += problem_.weights.species * e;
    }
    for (size_t k = 0; k < flux_sim_.size(); ++k) {
        double e = nrms(sim.flux_series(flux_sim_[k]), flux_ref_series_[k]);
        out.flux_nrms.push_back(e);
        total += problem_.weights.flux * e;
    }
    out.value = total;
    if (!std::isfinite(total)) {
        out.failed = true;
        out.failure = "non-finite cost";
    }
    return out;
}

CostBreakdown CostFunction::evaluate(const std::vector<double>& x) const {
    auto c = raw(x);
    if (c.failed) c.value = penalty_;
    return c;
}

void AnnealConfig::validate() const {
    if (chains < 1) throw std::invalid_argument("anneal: chain count must be >= 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
        throw std::invalid_argument("anneal: target acceptance must lie in (0,1)");
    if (max_evaluations < 0 || exchange_interval < 1 || stats_window < 1)
        throw std::invalid_argument("anneal: invalid budget settings");
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PWH_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

namespace {

// Coordinates in which moves are made: log(x + offset) for positive
// quantities, x itself otherwise.
struct Coord {
    bool log = false;
    double offset = 0.0;
    double lo = 0.0, hi = 1.0;  // bounds in move coordinates

    double to(double x) const { return log ? std::log(x + offset) : x; }
    double from(double y) const { return log ? std::exp(y) - offset : y; }
};

class Chain {
public:
    Chain(const Objective& f, const std::vector<FitParameter>& layout, const AnnealConfig& cfg, std::uint64_t seed,
          int index)
        : f_(f), layout_(layout), cfg_(cfg) {
        std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(index), 0x5eedU};
        rng_.seed(sq);
        for (const auto& p : layout) {
            Coord c;
            c.log = (p.kind == ParamKind::Rate || p.kind == ParamKind::Threshold) && p.lower >= 0.0;
            c.offset = c.log ? 1e-3 * std::max(p.upper, 1e-300) : 0.0;
            c.lo = c.to(p.lower);
            c.hi = c.to(p.upper);
            coords_.push_back(c);
            step_.push_back(c.log ? 0.1 : 0.05 * (p.upper - p.lower));
        }
    }

    void start(const std::vector<double>& x0, const double* known = nullptr) {
        x_ = x0;
        y_.resize(x0.size());
        for (size_t k = 0; k < x0.size(); ++k) y_[k] = coords_[k].to(x0[k]);
        e_ = known ? *known : eval(x_);
        best_x_ = x_;
        best_e_ = e_;
        mean_ = e_;
    }

    // Probes moves around the start point. The start temperature accepts a
    // median uphill move with probability 1/2, capped at a tenth of the
    // start cost so that a good initial guess is not lost at once.
    void calibrate(long moves, std::vector<HistoryRow>& hist) {
        std::vector<double> up;
        for (long i = 0; i < moves && !x_.empty(); ++i) {
            propose_and_decide(0.0, true);
            if (last_ok_ && last_e_ > e_) up.push_back(last_e_ - e_);
            hist.push_back({0, std::numeric_limits<double>::infinity(), last_e_, best_e_});
        }
        double t0 = 0.1 * std::abs(e_);
        if (!up.empty()) {
            std::nth_element(up.begin(), up.begin() + up.size() / 2, up.end());
            t0 = std::min(up[up.size() / 2] / std::log(2.0), t0 > 0.0 ? t0 : up[up.size() / 2]);
        }
        s_ = 1.0 / std::max(t0, 1e-12 * std::max(std::abs(e_), 1e-300));
        mean_ = e_;
        var_ = t0 * t0;
    }

    void run(long moves, std::vector<HistoryRow>& hist) {
        const double w = 1.0 / static_cast<double>(cfg_.stats_window);
        for (long i = 0; i < moves; ++i) {
            if (x_.empty()) {
                hist.push_back({0, 1.0 / s_, e_, best_e_});
                continue;
            }
            bool acc = propose_and_decide(s_);
            rho_ = (1.0 - w) * rho_ + w * (acc ? 1.0 : 0.0);
            double d = e_ - mean_;
            mean_ += w * d;
            var_ = (1.0 - w) * (var_ + w * d * d);
            double sd = std::sqrt(std::max(var_, 0.0));
            sd = std::max(sd, 1e-12 * (std::abs(mean_) + 1e-300));
            double g = 4.0 * rho_ * (1.0 - rho_) * (1.0 - rho_) / ((2.0 - rho_) * (2.0 - rho_));
            double ds = cfg_.lam_quality * (1.0 / sd) * (1.0 / (s_ * s_ * sd * sd)) * g;
            s_ += std::min(ds, 0.05 * s_);
            hist.push_back({0, 1.0 / s_, e_, best_e_});
        }
    }

    void adopt(const std::vector<double>& x, double e) {
        x_ = x;
        e_ = e;
        for (size_t k = 0; k < x_.size(); ++k) y_[k] = coords_[k].to(x_[k]);
        if (e < best_e_) {
            best_e_ = e;
            best_x_ = x;
        }
    }

    const std::vector<double>& best_x() const { return best_x_; }
    double best_e() const { return best_e_; }
    long evaluations() const { return evals_; }

private:
    double eval(const std::vector<double>& x) {
        ++evals_;
        auto [e, failed] = f_(x);
        if (failed || !std::isfinite(e)) {
            if (++consecutive_failures_ >= cfg_.max_consecutive_failures)
                throw AnnealError("objective failed " + std::to_string(consecutive_failures_) + " times in a row");
            if (!std::isfinite(e)) e = std::numeric_limits<double>::max();
        } else {
            consecutive_failures_ = 0;
        }
        return e;
    }

    bool propose_and_decide(double s, bool dry = false) {
        std::uniform_int_distribution<size_t> pick(0, x_.size() - 1);
        size_t k = pick(rng_);
        const auto& c = coords_[k];
        double y = y_[k];
        if (c.log) {
            std::normal_distribution<double> nd(0.0, 1.0);
            y += step_[k] * nd(rng_);
        } else {
            std::uniform_real_distribution<double> ud(-1.0, 1.0);
            y += step_[k] * ud(rng_);
        }
        // Reflect into the box.
        double span = c.hi - c.lo;
        if (span > 0.0) {
            for (int it = 0; it < 4 && (y < c.lo || y > c.hi); ++it) y = y < c.lo ? 2 * c.lo - y : 2 * c.hi - y;
            y = std::clamp(y, c.lo, c.hi);
        }
        auto x = x_;
        x[k] = std::clamp(c.from(y), layout_[k].lower, layout_[k].upper);
        const long fails_before = consecutive_failures_;
        double e = eval(x);
        last_e_ = e;
        last_ok_ = consecutive_failures_ <= fails_before;
        if (dry) return false;
        bool accept = e <= e_;
        if (!accept) {
            std::uniform_real_distribution<double> ud(0.0, 1.0);
            accept = ud(rng_) < std::exp(-s * (e - e_));
        }
        double factor = std::exp(cfg_.move_adapt * ((accept ? 1.0 : 0.0) - cfg_.target_acceptance));
        step_[k] = std::clamp(step_[k] * factor, 1e-12 * std::max(span, 1e-300), std::max(span, 1e-300));
        if (accept) {
            x_ = std::move(x);
            y_[k] = y;
            e_ = e;
            if (e < best_e_) {
                best_e_ = e;
                best_x_ = x_;
            }
        }
        return accept;
    }

    const Objective& f_;
    const std::vector<FitParameter>& layout_;
    const AnnealConfig& cfg_;
    std::mt19937_64 rng_;
    std::vector<Coord> coords_;
    std::vector<double> step_;
    std::vector<double> x_, y_, best_x_;
    double e_ = 0.0, best_e_ = 0.0;
    double s_ = 1.0;
    double mean_ = 0.0, var_ = 0.0, rho_ = 0.5;
    long evals_ = 0;
    long consecutive_failures_ = 0;
    double last_e_ = 0.0;
    bool last_ok_ = false;
};

}  // namespace

AnnealResult lam_anneal(const Objective& f, const std::vector<FitParameter>& layout, const AnnealConfig& cfg,
                        std::uint64_t seed) {
    cfg.validate();
    std::vector<double> x0;
    for (const auto& p : layout) x0.push_back(p.initial);
    AnnealResult res;

    const int nc = cfg.chains;
    std::vector<Chain> chains;
    chains.reserve(nc);
    for (int c = 0; c < nc; ++c) chains.emplace_back(f, layout, cfg, seed, c);

    // Initial evaluation is shared: every chain starts from the same point.
    chains[0].start(x0);
    const double e0 = chains[0].best_e();
    for (int c = 1; c < nc; ++c) chains[c].start(x0, &e0);
    res.best = x0;
    res.best_cost = chains[0].best_e();
    if (cfg.max_evaluations == 0) {
        res.history.push_back({0, std::numeric_limits<double>::infinity(), res.best_cost, res.best_cost});
        res.evaluations = 0;
        return res;
    }

    const long per_chain = std::max<long>(cfg.max_evaluations / nc, 1);
    const long calib = std::min(cfg.initial_samples, per_chain / 10);
    const int threads = std::min(resolve_threads(cfg.threads), nc);

    auto parallel = [&](auto&& body) {
        if (threads <= 1) {
            for (int c = 0; c < nc; ++c) body(c);
            return;
        }
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(threads);
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (int c = w; c < nc; c += threads) body(c);
                } catch (...) {
                    errs[w] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    };

    std::vector<std::vector<HistoryRow>> hist(nc);
    auto flush = [&]() {
        for (int c = 0; c < nc; ++c) {
            for (auto row : hist[c]) {
                row.evaluation = static_cast<long>(res.history.size()) + 1;
                double prev = res.history.empty() ? res.best_cost : res.history.back().best_cost;
                row.best_cost = std::min(prev, row.current_cost);
                res.history.push_back(row);
            }
            hist[c].clear();
        }
    };

    parallel([&](int c) { chains[c].calibrate(calib, hist[c]); });
    flush();

    long done = calib;
    long since_best = 0;
    double last_best = res.best_cost;
    while (done < per_chain) {
        long n = std::min(cfg.exchange_interval, per_chain - done);
        parallel([&](int c) { chains[c].run(n, hist[c]); });
        flush();
        done += n;
        // Exchange: every chain continues from the best state found so far.
        int bc = 0;
        for (int c = 1; c < nc; ++c)
            if (chains[c].best_e() < chains[bc].best_e()) bc = c;
        if (chains[bc].best_e() < res.best_cost) {
            res.best_cost = chains[bc].best_e();
            res.best = chains[bc].best_x();
        }
        if (nc > 1)
            for (int c = 0; c < nc; ++c)
                if (c != bc) chains[c].adopt(res.best, res.best_cost);
        if (res.best_cost < last_best) {
            last_best = res.best_cost;
            since_best = 0;
        } else {
            since_best += n * nc;
        }
        if (cfg.stall_limit > 0 && since_best >= cfg.stall_limit) break;
    }
    for (const auto& ch : chains) {
        res.evaluations += ch.evaluations();
        if (ch.best_e() < res.best_cost) {
            res.best_cost = ch.best_e();
            res.best = ch.best_x();
        }
    }
    return res;
}

AnnealResult lam_anneal(const CostFunction& cost, const AnnealConfig& cfg, std::uint64_t seed) {
    Objective f = [&cost](const std::vector<double>& x) {
        auto c = cost.evaluate(x);
        return std::make_pair(c.value, c.failed);
    };
    return lam_anneal(f, cost.problem().layout, cfg, seed);
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& h, const std::string& header) {
    if (!header.empty()) {
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) out << "# " << l << "\n";
    }
    out << "evaluation,temperature,current_cost,best_cost\n";
    for (const auto& r : h)
        out << r.evaluation << "," << format_double(r.temperature) << "," << format_double(r.current_cost) << ","
            << format_double(r.best_cost) << "\n";
}

void save_fit_problem(const std::string& path, const FitProblem& fp, const std::string& model_path,
                      const std::string& reference_path, const std::string& header) {
    json j;
    if (!header.empty()) j["header"] = header;
    j["model"] = model_path;
    j["reference"] = reference_path;
    j["strategy"] = strategy_name(fp.strategy);
    j["layout"] = json::array();
    for (const auto& f : fp.layout)
        j["layout"].push_back(
            {{"name", f.name}, {"initial", f.initial}, {"lower", f.lower}, {"upper", f.upper}, {"kind", param_kind_name(f.kind)}});
    j["species_signals"] = fp.species_signals;
    j["flux_signals"] = fp.flux_signals;
    j["weights"] = {{"species", fp.weights.species}, {"flux", fp.weights.flux}};
    j["integrator"] = {{"rtol", fp.integrator.rtol},
                       {"atol", fp.integrator.atol},
                       {"max_step", std::isfinite(fp.integrator.max_step) ? fp.integrator.max_step : 0.0},
                       {"min_dwell", fp.integrator.min_dwell},
                       {"event_tol", fp.integrator.event_tol},
                       {"max_events_per_time", fp.integrator.max_events_per_time}};
    j["penalty"] = fp.penalty;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

FitProblem load_fit_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fit problem " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("fit problem " + path + ": " + e.what());
    }
    namespace fs = std::filesystem;
    auto base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).string();
    };
    FitProblem fp;
    try {
        fp.model = load_model(resolve(j.at("model").get<std::string>()));
        fp.reference = load_trajectory(resolve(j.at("reference").get<std::string>()));
        fp.strategy = strategy_from_name(j.at("strategy").get<std::string>());
        for (const auto& e : j.at("layout"))
            fp.layout.push_back({e.at("name").get<std::string>(), e.at("initial").get<double>(),
                                 e.at("lower").get<double>(), e.at("upper").get<double>(),
                                 param_kind_from_name(e.at("kind").get<std::string>())});
        fp.species_signals = j.at("species_signals").get<std::vector<std::string>>();
        fp.flux_signals = j.at("flux_signals").get<std::vector<std::string>>();
        if (j.contains("weights")) {
            fp.weights.species = j["weights"].value("species", 1.0);
            fp.weights.flux = j["weights"].value("flux", 1.0);
        }
        if (j.contains("integrator")) {
            const auto& ic = j["integrator"];
            fp.integrator.rtol = ic.value("rtol", fp.integrator.rtol);
            fp.integrator.atol = ic.value("atol", fp.integrator.atol);
            double ms = ic.value("max_step", 0.0);
            if (ms > 0.0) fp.integrator.max_step = ms;
            fp.integrator.min_dwell = ic.value("min_dwell", fp.integrator.min_dwell);
            fp.integrator.event_tol = ic.value("event_tol", fp.integrator.event_tol);
            fp.integrator.max_events_per_time = ic.value("max_events_per_time", fp.integrator.max_events_per_time);
        }
        fp.penalty = j.value("penalty", 0.0);
    } catch (const json::exception& e) {
        throw std::runtime_error("fit problem " + path + ": " + e.what());
    }
    fp.validate();
    return fp;
}

}  // namespace pwh
