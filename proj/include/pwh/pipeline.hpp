#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pwh/fit.hpp"
#include "pwh/mode_control.hpp"
#include "pwh/simulate.hpp"

namespace pwh {

// Bad user input (missing files, malformed config); maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CandidatePolicy { PerReaction, AllSpecies, Listed };

struct PipelineConfig {
    std::string out_dir = ".";
    double t0 = 0.0, t1 = 100.0;
    IntegratorConfig integrator;
    AnnealConfig anneal;
    GaConfig ga;
    CostWeights weights;
    Strategy strategy = Strategy::Dynamic;
    std::uint64_t seed = 1;
    CandidatePolicy candidates = CandidatePolicy::PerReaction;
    std::map<std::string, std::vector<std::string>> listed;  // boolean -> species
    bool validate_simulate = true;
};

// Applies keys from a JSON config file on top of `cfg`.
void load_config(const std::string& path, PipelineConfig& cfg);
std::string config_json(const PipelineConfig& cfg);
std::uint64_t fnv1a64(const std::string& s);
std::string config_hash(const PipelineConfig& cfg);
std::string output_header(const PipelineConfig& cfg, const std::string& command);

Trajectory cmd_simulate(const std::string& model_path, const PipelineConfig& cfg, std::ostream& log);
void cmd_hybridize(const std::string& model_path, const std::string& trajectory_path, const PipelineConfig& cfg,
                   std::ostream& log);
AnnealResult cmd_fit(const std::string& problem_path, const PipelineConfig& cfg, std::ostream& log);
ControlValidation cmd_modectrl(const std::string& model_path, const std::string& trajectory_path,
                               const std::string& schedule_path, const PipelineConfig& cfg, std::ostream& log);

struct CompareRow {
    std::string signal;  // species name or "flux:<reaction>"
    double nrms = 0.0;
};
std::vector<CompareRow> cmd_compare(const std::string& model_a, const std::string& model_b, const PipelineConfig& cfg,
                                    std::ostream& log);

// Species candidate pool for a boolean of a hybrid model.
std::vector<int> candidate_pool(const ReactionNetwork& net, const std::string& boolean, const PipelineConfig& cfg);

}  // namespace pwh
