#include "pwh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pwh/hybridize.hpp"
#include "pwh/model_io.hpp"

namespace pwh {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& v) {
    if (j.contains(key)) v = j.at(key).get<T>();
}

std::string candidates_name(CandidatePolicy c) {
    switch (c) {
        case CandidatePolicy::PerReaction: return "per-reaction";
        case CandidatePolicy::AllSpecies: return "all-species";
        default: return "listed";
    }
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path);
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return (fs::path(cfg.out_dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

ReactionNetwork load_model_checked(const std::string& path) {
    require_file(path, "model file");
    return load_model(path);
}

Trajectory load_trajectory_checked(const std::string& path) {
    require_file(path, "trajectory file");
    try {
        return load_trajectory(path);
    } catch (const std::invalid_argument& e) {
        throw InputError(path + ": " + e.what());
    }
}

void species_of(const Monomial& m, std::set<int>& out) {
    for (auto [k, e] : m.powers) out.insert(k);
}

void species_of(const AffineExpr& e, std::set<int>& out) {
    for (int k : e.species()) out.insert(k);
}

}  // namespace

void load_config(const std::string& path, PipelineConfig& cfg) {
    require_file(path, "config file");
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
        if (j.contains("t_span")) {
            auto ts = j.at("t_span").get<std::vector<double>>();
            if (ts.size() != 2) throw InputError("config: t_span needs two values");
            cfg.t0 = ts[0];
            cfg.t1 = ts[1];
        }
        if (j.contains("strategy")) cfg.strategy = strategy_from_name(j.at("strategy").get<std::string>());
        get_opt(j, "seed", cfg.seed);
        get_opt(j, "validate_simulate", cfg.validate_simulate);
        if (j.contains("integrator")) {
            const auto& i = j.at("integrator");
            auto& c = cfg.integrator;
            get_opt(i, "rtol", c.rtol);
            get_opt(i, "atol", c.atol);
            get_opt(i, "max_step", c.max_step);
            get_opt(i, "output_dt", c.output_dt);
            get_opt(i, "min_dwell", c.min_dwell);
            get_opt(i, "event_tol", c.event_tol);
            get_opt(i, "max_events_per_time", c.max_events_per_time);
            get_opt(i, "max_steps", c.max_steps);
            get_opt(i, "divergence_bound", c.divergence_bound);
        }
        if (j.contains("anneal")) {
            const auto& a = j.at("anneal");
            auto& c = cfg.anneal;
            get_opt(a, "chains", c.chains);
            get_opt(a, "max_evaluations", c.max_evaluations);
            get_opt(a, "exchange_interval", c.exchange_interval);
            get_opt(a, "target_acceptance", c.target_acceptance);
            get_opt(a, "lam_quality", c.lam_quality);
            get_opt(a, "stats_window", c.stats_window);
            get_opt(a, "initial_samples", c.initial_samples);
            get_opt(a, "move_adapt", c.move_adapt);
            get_opt(a, "stall_limit", c.stall_limit);
            get_opt(a, "max_consecutive_failures", c.max_consecutive_failures);
            get_opt(a, "threads", c.threads);
        }
        if (j.contains("ga")) {
            const auto& g = j.at("ga");
            auto& c = cfg.ga;
            get_opt(g, "population", c.population);
            get_opt(g, "generations", c.generations);
            get_opt(g, "mutation_rate", c.mutation_rate);
            get_opt(g, "elitism", c.elitism);
            get_opt(g, "parsimony", c.parsimony);
            get_opt(g, "threads", c.threads);
            get_opt(g, "margin", c.lp.margin);
            get_opt(g, "epsilon_bound", c.lp.epsilon_bound);
            get_opt(g, "state_scale", c.lp.state_scale);
            get_opt(g, "stride", c.lp.stride);
            get_opt(g, "exclude_steps", c.lp.exclude_steps);
        }
        if (j.contains("weights")) {
            get_opt(j.at("weights"), "species", cfg.weights.species);
            get_opt(j.at("weights"), "flux", cfg.weights.flux);
        }
        if (j.contains("candidates")) {
            const auto& c = j.at("candidates");
            if (c.is_string()) {
                auto s = c.get<std::string>();
                if (s == "per-reaction") cfg.candidates = CandidatePolicy::PerReaction;
                else if (s == "all-species") cfg.candidates = CandidatePolicy::AllSpecies;
                else throw InputError("config: unknown candidate policy '" + s + "'");
            } else {
                cfg.candidates = CandidatePolicy::Listed;
                cfg.listed = c.get<std::map<std::string, std::vector<std::string>>>();
            }
        }
    } catch (const json::exception& e) {
        throw InputError("config " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError("config " + path + ": " + e.what());
    }
    cfg.integrator.validate();
    cfg.anneal.validate();
}

std::string config_json(const PipelineConfig& cfg) {
    json j;
    j["t_span"] = {cfg.t0, cfg.t1};
    j["strategy"] = strategy_name(cfg.strategy);
    j["seed"] = cfg.seed;
    const auto& i = cfg.integrator;
    j["integrator"] = {{"rtol", i.rtol},
                       {"atol", i.atol},
                       {"max_step", std::isfinite(i.max_step) ? i.max_step : -1.0},
                       {"output_dt", i.output_dt},
                       {"min_dwell", i.min_dwell},
                       {"event_tol", i.event_tol},
                       {"max_events_per_time", i.max_events_per_time},
                       {"max_steps", i.max_steps},
                       {"divergence_bound", i.divergence_bound}};
    const auto& a = cfg.anneal;
    j["anneal"] = {{"chains", a.chains},
                   {"max_evaluations", a.max_evaluations},
                   {"exchange_interval", a.exchange_interval},
                   {"target_acceptance", a.target_acceptance},
                   {"lam_quality", a.lam_quality},
                   {"stats_window", a.stats_window},
                   {"initial_samples", a.initial_samples},
                   {"move_adapt", a.move_adapt},
                   {"stall_limit", a.stall_limit},
                   {"max_consecutive_failures", a.max_consecutive_failures}};
    const auto& g = cfg.ga;
    j["ga"] = {{"population", g.population},     {"generations", g.generations},
               {"mutation_rate", g.mutation_rate}, {"elitism", g.elitism},
               {"parsimony", g.parsimony},         {"margin", g.lp.margin},
               {"epsilon_bound", g.lp.epsilon_bound}, {"state_scale", g.lp.state_scale},
               {"stride", g.lp.stride},           {"exclude_steps", g.lp.exclude_steps}};
    j["weights"] = {{"species", cfg.weights.species}, {"flux", cfg.weights.flux}};
    if (cfg.candidates == CandidatePolicy::Listed)
        j["candidates"] = cfg.listed;
    else
        j["candidates"] = candidates_name(cfg.candidates);
    j["validate_simulate"] = cfg.validate_simulate;
    return j.dump();
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const PipelineConfig& cfg) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config_json(cfg));
    return os.str();
}

std::string output_header(const PipelineConfig& cfg, const std::string& command) {
    return "pwh " + command + "\nconfig_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed);
}

Trajectory cmd_simulate(const std::string& model_path, const PipelineConfig& cfg, std::ostream& log) {
    auto net = load_model_checked(model_path);
    if (!(cfg.t1 > cfg.t0)) throw InputError("t_span must satisfy t0 < t1");
    auto p = net.parameter_values();
    auto traj = integrate(net, p, net.initial, cfg.t0, cfg.t1, cfg.integrator);
    const auto header = output_header(cfg, "simulate");
    {
        auto f = open_out(out_path(cfg, "trajectory.csv"));
        write_trajectory_csv(f, traj, header);
    }
    {
        auto f = open_out(out_path(cfg, "events.csv"));
        write_events_csv(f, traj, header);
    }
    log << "simulated " << traj.size() << " points, " << traj.events.size() << " events\n";
    if (auto per = detect_period(traj)) log << "period " << format_double(*per) << "\n";
    return traj;
}

void cmd_hybridize(const std::string& model_path, const std::string& trajectory_path, const PipelineConfig& cfg,
                   std::ostream& log) {
    auto net = load_model_checked(model_path);
    auto ref = load_trajectory_checked(trajectory_path);
    if (ref.species != net.species) throw InputError("trajectory species do not match the model");
    if (!detect_period(ref)) log << "warning: no period detected in the reference trajectory\n";
    auto plan = make_plan(net, ref);
    for (const auto& w : plan.warnings) log << "warning: " << w << "\n";
    auto build = build_hybrid_model(net, plan, cfg.strategy, ref, cfg.integrator);
    build.problem.weights = cfg.weights;
    const auto header = output_header(cfg, "hybridize") + "\nstrategy=" + strategy_name(cfg.strategy);

    save_model(out_path(cfg, "hybrid.model"), build.model, header);
    {
        auto f = open_out(out_path(cfg, "schedule.csv"));
        write_schedule_csv(f, plan.booleans, header);
    }
    // The reference is copied next to the problem so the bundle is self-contained.
    const auto ref_copy = out_path(cfg, "reference.csv");
    if (fs::weakly_canonical(ref_copy) != fs::weakly_canonical(trajectory_path)) save_trajectory(ref_copy, ref, header);
    save_fit_problem(out_path(cfg, "fit_problem.json"), build.problem, "hybrid.model", "reference.csv", header);

    for (const auto& rp : plan.reactions) {
        log << net.reactions[rp.reaction].name << ": " << switching_name(rp.classification) << " -> "
            << target_form_name(rp.form);
        if (rp.boolean >= 0) log << " (" << plan.booleans[rp.boolean].name << ")";
        log << "\n";
    }
    log << plan.booleans.size() << " booleans, " << build.problem.layout.size() << " fit parameters ("
        << strategy_name(cfg.strategy) << ")\n";
}

AnnealResult cmd_fit(const std::string& problem_path, const PipelineConfig& cfg, std::ostream& log) {
    require_file(problem_path, "fit problem");
    FitProblem fp;
    try {
        fp = load_fit_problem(problem_path);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    CostFunction cost(fp);
    const auto x0 = fp.initial_vector();
    const auto c0 = cost.evaluate(x0);
    log << "initial cost " << format_double(c0.value) << (c0.failed ? " (failed: " + c0.failure + ")" : "") << "\n";
    auto res = lam_anneal(cost, cfg.anneal, cfg.seed);
    log << "best cost " << format_double(res.best_cost) << " after " << res.evaluations << " evaluations\n";

    const auto header = output_header(cfg, "fit");
    auto fitted = fp.model;
    auto p = cost.parameters(res.best);
    for (size_t q = 0; q < p.size(); ++q) fitted.parameters[q].value = p[q];
    save_model(out_path(cfg, "fitted.model"), fitted, header);
    {
        auto f = open_out(out_path(cfg, "history.csv"));
        write_history_csv(f, res.history, header);
    }
    {
        auto f = open_out(out_path(cfg, "fitted_parameters.txt"));
        std::istringstream hs(header);
        for (std::string l; std::getline(hs, l);) f << "# " << l << "\n";
        for (size_t k = 0; k < fp.layout.size(); ++k)
            f << fp.layout[k].name << " = " << format_double(res.best[k]) << "\n";
    }
    try {
        auto sim = cost.simulate(res.best);
        save_trajectory(out_path(cfg, "fitted_trajectory.csv"), sim, header);
    } catch (const SimulationError& e) {
        log << "warning: best parameters do not simulate: " << e.what() << "\n";
    }
    return res;
}

std::vector<int> candidate_pool(const ReactionNetwork& net, const std::string& boolean, const PipelineConfig& cfg) {
    const int b = net.boolean_index(boolean);
    if (b < 0) throw InputError("unknown boolean '" + boolean + "'");
    std::vector<int> all(net.n_species());
    for (int k = 0; k < net.n_species(); ++k) all[k] = k;
    if (cfg.candidates == CandidatePolicy::AllSpecies) return all;
    if (cfg.candidates == CandidatePolicy::Listed) {
        auto it = cfg.listed.find(boolean);
        if (it == cfg.listed.end()) return all;
        std::vector<int> out;
        for (const auto& s : it->second) {
            int k = net.species_index(s);
            if (k < 0) throw InputError("candidate list for " + boolean + ": unknown species " + s);
            out.push_back(k);
        }
        return out;
    }
    std::set<int> s;
    for (const auto& g : net.guards)
        if (std::find(g.controls.begin(), g.controls.end(), b) != g.controls.end()) species_of(g.expr, s);
    if (s.empty()) {
        for (const auto& r : net.reactions) {
            if (auto* m = std::get_if<law::SwitchedLinear>(&r.rate); m && m->boolean == b) species_of(m->x, s);
            if (auto* m = std::get_if<law::SwitchedMonomial>(&r.rate); m && m->boolean == b) species_of(m->on, s);
        }
    }
    if (s.empty()) return all;
    return {s.begin(), s.end()};
}

ControlValidation cmd_modectrl(const std::string& model_path, const std::string& trajectory_path,
                               const std::string& schedule_path, const PipelineConfig& cfg, std::ostream& log) {
    auto net = load_model_checked(model_path);
    auto traj = load_trajectory_checked(trajectory_path);
    require_file(schedule_path, "schedule file");
    EventSchedule sched;
    {
        std::ifstream in(schedule_path);
        try {
            sched = read_schedule_csv(in);
        } catch (const std::exception& e) {
            throw InputError(schedule_path + ": " + e.what());
        }
    }
    if (traj.species != net.species) throw InputError("trajectory species do not match the model");

    std::vector<ControlReportRow> rows;
    for (size_t k = 0; k < sched.size(); ++k) {
        const auto& sch = sched[k];
        auto pool = candidate_pool(net, sch.name, cfg);
        auto ga = ga_select_controls(traj, sch, pool, cfg.ga, cfg.seed + k);
        if (ga.solution.status != LpStatus::Optimal)
            throw std::runtime_error("control LP for " + sch.name + " failed: " + ga.solution.diagnostics);
        install_guard(net, sch.name, ga.subset, ga.solution.w);
        ControlReportRow row;
        row.boolean = sch.name;
        for (int s : ga.subset) row.species.push_back(net.species[s]);
        row.weights = normalize_weights(ga.solution.w);
        row.epsilon = ga.solution.epsilon;
        rows.push_back(row);
        log << sch.name << ": epsilon " << format_double(ga.solution.epsilon) << " over {";
        for (size_t i = 0; i < row.species.size(); ++i) log << (i ? ", " : "") << row.species[i];
        log << "}\n";
    }
    net.validate();
    HybridModel hm(net);
    ValidateConfig vc;
    vc.lp = cfg.ga.lp;
    vc.simulate = cfg.validate_simulate;
    vc.integrator = cfg.integrator;
    auto val = validate_controls(hm, sched, traj, vc);
    for (size_t k = 0; k < rows.size(); ++k) rows[k].mismatch_fraction = val.booleans[k].mismatch_fraction;

    const auto header = output_header(cfg, "modectrl");
    save_model(out_path(cfg, "controlled.model"), net, header);
    {
        auto f = open_out(out_path(cfg, "control_report.csv"));
        write_control_report(f, rows, header);
    }
    if (val.diverged) log << "warning: controlled model is unstable: " << val.diagnostics << "\n";
    return val;
}

std::vector<CompareRow> cmd_compare(const std::string& model_a, const std::string& model_b, const PipelineConfig& cfg,
                                    std::ostream& log) {
    auto a = load_model_checked(model_a);
    auto b = load_model_checked(model_b);
    if (a.species != b.species) {
        std::string diff;
        for (const auto& s : a.species)
            if (b.species_index(s) < 0) diff += " -" + s;
        for (const auto& s : b.species)
            if (a.species_index(s) < 0) diff += " +" + s;
        if (diff.empty()) diff = " (same names, different order)";
        throw InputError("species mismatch:" + diff);
    }
    if (!(cfg.t1 > cfg.t0)) throw InputError("t_span must satisfy t0 < t1");
    std::vector<double> grid;
    const long n = static_cast<long>(std::floor((cfg.t1 - cfg.t0) / cfg.integrator.output_dt + 1e-9));
    for (long i = 0; i <= n; ++i) grid.push_back(cfg.t0 + i * cfg.integrator.output_dt);
    if (grid.back() < cfg.t1) grid.push_back(cfg.t1);
    auto pa = a.parameter_values();
    auto pb = b.parameter_values();
    auto ta = integrate(a, pa, a.initial, cfg.t0, cfg.t1, cfg.integrator, &grid);
    auto tb = integrate(b, pb, a.initial, cfg.t0, cfg.t1, cfg.integrator, &grid);

    std::vector<CompareRow> rows;
    for (size_t k = 0; k < ta.n_species(); ++k)
        rows.push_back({ta.species[k], nrms(tb.species_series(k), ta.species_series(k))});
    std::vector<std::pair<int, int>> shared;
    for (int r = 0; r < a.n_reactions(); ++r) {
        int q = b.reaction_index(a.reactions[r].name);
        if (q < 0) continue;
        shared.push_back({r, q});
        rows.push_back({"flux:" + a.reactions[r].name, nrms(tb.flux_series(q), ta.flux_series(r))});
    }

    const auto header = output_header(cfg, "compare") + "\nA=" + model_a + "\nB=" + model_b;
    {
        auto f = open_out(out_path(cfg, "compare.csv"));
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) f << "# " << l << "\n";
        f << "t";
        for (const auto& s : ta.species) f << ",A:" << s << ",B:" << s;
        for (auto [r, q] : shared) f << ",A:flux:" << a.reactions[r].name << ",B:flux:" << b.reactions[q].name;
        f << "\n";
        for (size_t i = 0; i < grid.size(); ++i) {
            f << format_double(grid[i]);
            for (size_t k = 0; k < ta.n_species(); ++k)
                f << "," << format_double(ta.state(i, k)) << "," << format_double(tb.state(i, k));
            for (auto [r, q] : shared) f << "," << format_double(ta.flux(i, r)) << "," << format_double(tb.flux(i, q));
            f << "\n";
        }
    }
    {
        auto f = open_out(out_path(cfg, "nrms.csv"));
        std::istringstream hs(header);
        std::string l;
        while (std::getline(hs, l)) f << "# " << l << "\n";
        f << "signal,nrms\n";
        for (const auto& r : rows) f << r.signal << "," << format_double(r.nrms) << "\n";
    }
    for (const auto& r : rows) log << std::left << std::setw(24) << r.signal << " " << format_double(r.nrms) << "\n";
    return rows;
}

}  // namespace pwh
