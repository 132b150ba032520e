#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pwh/model_io.hpp"
#include "pwh/pipeline.hpp"

namespace {

std::pair<double, double> parse_tspan(const std::string& s) {
    std::istringstream in(s);
    double a, b;
    char sep;
    if (!(in >> a >> sep >> b) || (sep != ',' && sep != ':')) throw pwh::InputError("--tspan expects t0,t1");
    return {a, b};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piecewise hybridization of biochemical reaction networks"};
    app.require_subcommand(1);

    std::string config, out = ".", tspan, strategy, model, trajectory, schedule, problem, other;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto common = [&](CLI::App* c) {
        c->add_option("--config", config, "JSON configuration file");
        c->add_option("--out", out, "output directory");
        c->add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_set = true; });
    };

    auto* sim = app.add_subcommand("simulate", "integrate a model and write trajectory and event CSVs");
    common(sim);
    sim->add_option("--model", model, "model file")->required();
    sim->add_option("--tspan", tspan, "t0,t1");

    auto* hyb = app.add_subcommand("hybridize", "detect switching and build the hybrid model and fit problem");
    common(hyb);
    hyb->add_option("--model", model, "smooth model file")->required();
    hyb->add_option("--trajectory", trajectory, "reference trajectory CSV")->required();
    hyb->add_option("--strategy", strategy, "static|transitions|dynamic");

    auto* fit = app.add_subcommand("fit", "anneal the hybrid model parameters");
    common(fit);
    fit->add_option("--problem,--model", problem, "fit problem JSON")->required();

    auto* mc = app.add_subcommand("modectrl", "synthesize guards for the model booleans");
    common(mc);
    mc->add_option("--model", model, "fitted hybrid model")->required();
    mc->add_option("--trajectory", trajectory, "trajectory CSV")->required();
    mc->add_option("--schedule", schedule, "schedule CSV")->required();

    auto* cmp = app.add_subcommand("compare", "simulate two models and report nRMS differences");
    common(cmp);
    cmp->add_option("--model", model, "model A")->required();
    cmp->add_option("--against", other, "model B")->required();
    cmp->add_option("--tspan", tspan, "t0,t1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        pwh::PipelineConfig cfg;
        if (!config.empty()) pwh::load_config(config, cfg);
        cfg.out_dir = out;
        if (seed_set) cfg.seed = seed;
        if (!tspan.empty()) std::tie(cfg.t0, cfg.t1) = parse_tspan(tspan);
        if (!strategy.empty()) {
            try {
                cfg.strategy = pwh::strategy_from_name(strategy);
            } catch (const std::invalid_argument& e) {
                throw pwh::InputError(e.what());
            }
        }

        if (sim->parsed()) pwh::cmd_simulate(model, cfg, std::cout);
        else if (hyb->parsed()) pwh::cmd_hybridize(model, trajectory, cfg, std::cout);
        else if (fit->parsed()) pwh::cmd_fit(problem, cfg, std::cout);
        else if (mc->parsed()) pwh::cmd_modectrl(model, trajectory, schedule, cfg, std::cout);
        else if (cmp->parsed()) pwh::cmd_compare(model, other, cfg, std::cout);
    } catch (const pwh::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pwh::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pwh::ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pwh::SimulationError& e) {
        std::cerr << "error: " << e.what() << " (t = " << e.time() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
