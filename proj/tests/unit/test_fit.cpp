#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "pwh/fit.hpp"
#include "pwh/model_io.hpp"

using namespace pwh;

namespace {

FitProblem smooth_problem() {
    FitProblem fp;
    fp.model = load_model(PWH_DATA_DIR "/synthetic3.model");
    fp.integrator.rtol = 1e-8;
    fp.integrator.atol = 1e-10;
    fp.integrator.output_dt = 0.1;
    fp.reference = integrate(fp.model, fp.model.parameter_values(), fp.model.initial, 0.0, 13.0, fp.integrator);
    fp.layout = {{"kx", 2.0, 0.5, 8.0, ParamKind::Rate}, {"Km", 0.02, 0.0, 0.2, ParamKind::Threshold}};
    fp.species_signals = fp.reference.species;
    fp.flux_signals = {"RX", "RXd"};
    return fp;
}

AnnealConfig single_chain(long evals) {
    AnnealConfig c;
    c.chains = 1;
    c.max_evaluations = evals;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("normalized rms") {
    CHECK(nrms({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(nrms({2, 3, 4}, {1, 2, 3}) == doctest::Approx(0.5));
    CHECK(nrms({1, 1}, {2, 2}) == doctest::Approx(0.5));
    CHECK(nrms({1, 1}, {0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("cost vanishes on the reference model") {
    auto fp = smooth_problem();
    CostFunction cost(fp);
    auto c = cost.evaluate(fp.initial_vector());
    CHECK(!c.failed);
    CHECK(c.value < 1e-9);
    CHECK(c.species_nrms.size() == 3);
    CHECK(c.flux_nrms.size() == 2);
    CHECK(cost.penalty() == doctest::Approx(1e-6));
    auto moved = cost.evaluate({3.0, 0.02});
    CHECK(moved.value > 1e-3);
}

TEST_CASE("out of bounds parameters get the penalty") {
    auto fp = smooth_problem();
    fp.penalty = 42.0;
    CostFunction cost(fp);
    auto c = cost.evaluate({100.0, 0.02});
    CHECK(c.failed);
    CHECK(c.value == 42.0);
}

TEST_CASE("zero budget returns the initial point") {
    auto fp = smooth_problem();
    CostFunction cost(fp);
    auto r = lam_anneal(cost, single_chain(0), 1);
    CHECK(r.best == fp.initial_vector());
    CHECK(r.best_cost == doctest::Approx(cost(fp.initial_vector())));
}

TEST_CASE("anneal finds the minimum of a quadratic") {
    std::vector<FitParameter> layout{{"x", 4.0, -10.0, 10.0, ParamKind::Linear}};
    Objective f = [](const std::vector<double>& x) { return std::pair{(x[0] - 1.7) * (x[0] - 1.7), false}; };
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto r = lam_anneal(f, layout, single_chain(10000), seed);
        CHECK(std::abs(r.best[0] - 1.7) < 1e-3);
        for (size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].best_cost <= r.history[i - 1].best_cost);
    }
}

TEST_CASE("anneal is deterministic and thread count does not matter") {
    std::vector<FitParameter> layout{{"x", 4.0, -10.0, 10.0, ParamKind::Linear},
                                     {"k", 1.0, 0.0, 50.0, ParamKind::Rate}};
    Objective f = [](const std::vector<double>& x) {
        return std::pair{std::pow(x[0] + 2.0, 2) + std::pow(std::log(x[1] / 7.0), 2), false};
    };
    AnnealConfig c;
    c.chains = 4;
    c.max_evaluations = 4000;
    c.exchange_interval = 200;
    c.threads = 1;
    auto a = lam_anneal(f, layout, c, 11);
    auto b = lam_anneal(f, layout, c, 11);
    c.threads = 4;
    auto t = lam_anneal(f, layout, c, 11);
    CHECK(a.best == b.best);
    CHECK(a.best == t.best);
    CHECK(a.history.size() == t.history.size());
    auto d = lam_anneal(f, layout, c, 12);
    CHECK(d.best != a.best);
    CHECK(a.best_cost < 1e-3);
}

TEST_CASE("persistent failures abort the anneal") {
    std::vector<FitParameter> layout{{"x", 0.0, -1.0, 1.0, ParamKind::Linear}};
    Objective f = [](const std::vector<double>&) { return std::pair{1.0, true}; };
    auto c = single_chain(100000);
    c.max_consecutive_failures = 50;
    CHECK_THROWS_AS(lam_anneal(f, layout, c, 1), AnnealError);
}

TEST_CASE("config validation") {
    AnnealConfig c;
    c.chains = 0;
    CHECK_THROWS(c.validate());
    CHECK(strategy_from_name("iii") == Strategy::Dynamic);
    CHECK(strategy_from_name("transitions") == Strategy::Transitions);
    CHECK_THROWS(strategy_from_name("bogus"));
    CHECK(param_kind_from_name(param_kind_name(ParamKind::Time)) == ParamKind::Time);
}

TEST_CASE("fit problem json round trip") {
    auto fp = smooth_problem();
    fp.penalty = 3.5;
    fp.weights.flux = 0.25;
    save_model("pwh_test_fp.model", fp.model);
    save_trajectory("pwh_test_fp.csv", fp.reference);
    save_fit_problem("pwh_test_fp.json", fp, "pwh_test_fp.model", "pwh_test_fp.csv");
    auto back = load_fit_problem("pwh_test_fp.json");
    CHECK(back.layout.size() == fp.layout.size());
    CHECK(back.layout[1].name == "Km");
    CHECK(back.layout[1].kind == ParamKind::Threshold);
    CHECK(back.layout[0].upper == fp.layout[0].upper);
    CHECK(back.flux_signals == fp.flux_signals);
    CHECK(back.weights.flux == 0.25);
    CHECK(back.penalty == 3.5);
    CHECK(back.integrator.rtol == fp.integrator.rtol);
    CHECK(back.reference.times == fp.reference.times);
    CostFunction a(fp), b(back);
    CHECK(a({2.5, 0.03}) == b({2.5, 0.03}));
    for (const char* p : {"pwh_test_fp.model", "pwh_test_fp.csv", "pwh_test_fp.json"}) std::remove(p);
}

TEST_CASE("history csv") {
    std::ostringstream os;
    write_history_csv(os, {{1, 2.0, 3.0, 3.0}, {2, 1.5, 4.0, 3.0}}, "seed=1");
    CHECK(os.str().rfind("# seed=1\n", 0) == 0);
    CHECK(os.str().find("evaluation") != std::string::npos);
}
