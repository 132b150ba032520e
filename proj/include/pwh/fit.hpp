#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "pwh/network.hpp"
#include "pwh/simulate.hpp"

namespace pwh {

enum class Strategy { Static, Transitions, Dynamic };
std::string strategy_name(Strategy s);  // "static", "transitions", "dynamic"
Strategy strategy_from_name(const std::string& s);

enum class ParamKind { Rate, Threshold, Time, Linear };
std::string param_kind_name(ParamKind k);
ParamKind param_kind_from_name(const std::string& s);

struct FitParameter {
    std::string name;
    double initial = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    ParamKind kind = ParamKind::Rate;
};

struct CostWeights {
    double species = 1.0;
    double flux = 1.0;
};

struct FitProblem {
    ReactionNetwork model;  // hybrid model; parameters hold the initialization
    Trajectory reference;
    Strategy strategy = Strategy::Dynamic;
    std::vector<FitParameter> layout;
    std::vector<std::string> species_signals;
    std::vector<std::string> flux_signals;  // reaction names present in both model and reference
    CostWeights weights;
    IntegratorConfig integrator;
    double penalty = 0.0;  // 0: derived from the initial cost on first use

    void validate() const;
    std::vector<double> initial_vector() const;
};

struct CostBreakdown {
    double value = 0.0;
    bool failed = false;
    std::string failure;
    std::vector<double> species_nrms;
    std::vector<double> flux_nrms;
};

double nrms(const std::vector<double>& sim, const std::vector<double>& ref);

// Resolves the parameter layout once; evaluate() is thread-safe.
class CostFunction {
public:
    explicit CostFunction(const FitProblem& problem);

    CostBreakdown evaluate(const std::vector<double>& x) const;
    double operator()(const std::vector<double>& x) const { return evaluate(x).value; }
    double penalty() const { return penalty_; }
    const FitProblem& problem() const { return problem_; }

    // Model parameter vector with x applied.
    std::vector<double> parameters(const std::vector<double>& x) const;
    Trajectory simulate(const std::vector<double>& x) const;

private:
    CostBreakdown raw(const std::vector<double>& x) const;

    const FitProblem& problem_;
    std::vector<int> param_index_;
    std::vector<int> species_ref_, species_sim_;
    std::vector<int> flux_ref_, flux_sim_;
    std::vector<std::vector<double>> species_ref_series_, flux_ref_series_;
    std::vector<std::vector<int>> schedule_times_;  // layout positions of each schedule's times
    double penalty_ = 0.0;
};

struct AnnealConfig {
    int chains = 8;
    long max_evaluations = 200000;  // total over all chains
    long exchange_interval = 500;   // evaluations per chain between exchanges
    double target_acceptance = 0.44;
    double lam_quality = 0.002;     // lambda in the Lam-Delosme update
    long stats_window = 100;        // memory of the running cost statistics
    long initial_samples = 100;     // random-walk moves used to set the start temperature
    double move_adapt = 0.05;       // step-size adaptation gain
    long stall_limit = 0;           // stop after this many evaluations without a new best; 0 disables
    long max_consecutive_failures = 2000;
    int threads = 0;                // 0: hardware concurrency (or PWH_THREADS)
    void validate() const;
};

struct HistoryRow {
    long evaluation = 0;
    double temperature = 0.0;
    double current_cost = 0.0;
    double best_cost = 0.0;
};

struct AnnealResult {
    std::vector<double> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<HistoryRow> history;
    long evaluations = 0;
};

class AnnealError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Objective returning a cost and a failure flag.
using Objective = std::function<std::pair<double, bool>(const std::vector<double>&)>;

AnnealResult lam_anneal(const Objective& f, const std::vector<FitParameter>& layout, const AnnealConfig& cfg,
                        std::uint64_t seed);
AnnealResult lam_anneal(const CostFunction& cost, const AnnealConfig& cfg, std::uint64_t seed);

int resolve_threads(int requested);

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& h, const std::string& header = {});

// JSON round trip; the model and reference are stored by path.
void save_fit_problem(const std::string& path, const FitProblem& fp, const std::string& model_path,
                      const std::string& reference_path, const std::string& header = {});
FitProblem load_fit_problem(const std::string& path);

}  // namespace pwh
