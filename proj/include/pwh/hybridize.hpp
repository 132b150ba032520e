#pragma once

#include <string>
#include <vector>

#include "pwh/events.hpp"
#include "pwh/fit.hpp"

namespace pwh {

enum class TargetForm { SwitchedMonomial, SwitchedLinear, FixedMode };
std::string target_form_name(TargetForm f);

struct ReactionPlan {
    int reaction = -1;
    TargetForm form = TargetForm::FixedMode;
    Switching classification = Switching::Switching;
    int boolean = -1;  // index into HybridizationPlan::booleans, -1 for fixed mode
};

struct HybridizationPlan {
    std::vector<ReactionPlan> reactions;
    EventSchedule booleans;  // deduplicated, switching only, named s1, s2, ...
    std::vector<std::string> warnings;
};

struct HybridizedLaw {
    RateLaw law;
    std::vector<FitParameter> introduced;  // rate parameters, in layout order
};

// Rewrites one GK or MM law. New parameters (the linear slope k'') are
// added to `net`; `boolean` is the model boolean index for switching laws.
HybridizedLaw hybridize_reaction(ReactionNetwork& net, int reaction, Switching classification, int boolean);

// Static schedules for every GK/MM reaction, classified and deduplicated.
HybridizationPlan make_plan(const ReactionNetwork& net, const Trajectory& reference);

struct HybridBuild {
    ReactionNetwork model;
    FitProblem problem;
};

HybridBuild build_hybrid_model(const ReactionNetwork& net, const HybridizationPlan& plan, Strategy strategy,
                               const Trajectory& reference, const IntegratorConfig& integrator = {});

}  // namespace pwh
