#include <cmath>
#include <random>

#include <doctest.h>

#include "../lp_oracle.hpp"
#include "pwh/mode_control.hpp"
#include "pwh/simplex.hpp"

using namespace pwh;

TEST_CASE("small known LPs") {
    // min -x - y  s.t.  x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
    Lp lp;
    lp.c = {-1.0, -1.0};
    lp.rows = {{-1.0, -2.0}, {-3.0, -1.0}};
    lp.b = {-4.0, -6.0};
    lp.lower = {0.0, 0.0};
    lp.upper = {INFINITY, INFINITY};
    auto r = simplex_solve(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.6));
    CHECK(r.x[1] == doctest::Approx(1.2));
    CHECK(r.objective == doctest::Approx(-2.8));

    Lp inf = lp;
    inf.rows.push_back({1.0, 1.0});
    inf.b.push_back(10.0);
    CHECK(simplex_solve(inf).status == LpStatus::Infeasible);

    Lp unb;
    unb.c = {-1.0, 0.0};
    unb.rows = {{1.0, -1.0}};
    unb.b = {0.0};
    unb.lower = {0.0, 0.0};
    unb.upper = {INFINITY, INFINITY};
    CHECK(simplex_solve(unb).status == LpStatus::Unbounded);

    Lp fr;  // free variable: min x  s.t. x >= -3
    fr.c = {1.0};
    fr.rows = {{1.0}};
    fr.b = {-3.0};
    auto f = simplex_solve(fr);
    REQUIRE(f.status == LpStatus::Optimal);
    CHECK(f.x[0] == doctest::Approx(-3.0));
}

TEST_CASE("degenerate standard form") {
    // Redundant equality row and a degenerate vertex.
    StandardLp lp;
    lp.m = 3;
    lp.n = 3;
    lp.A = {1, 1, 1, 2, 2, 2, 1, -1, 0};
    lp.b = {1, 2, 0};
    lp.c = {1, 2, -1};
    auto r = solve_standard(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.objective == doctest::Approx(-1.0));
    CHECK(r.x[2] == doctest::Approx(1.0));
}

TEST_CASE("random LPs agree with vertex enumeration") {
    std::mt19937_64 rng(2024);
    int optimal = 0, infeasible = 0;
    for (int k = 0; k < 300; ++k) {
        auto lp = test::random_lp(rng);
        auto oracle = test::vertex_enumeration(lp);
        auto r = simplex_solve(lp);
        if (!oracle) {
            CHECK(r.status == LpStatus::Infeasible);
            ++infeasible;
            continue;
        }
        REQUIRE(r.status == LpStatus::Optimal);
        CHECK(std::abs(r.objective - *oracle) <= 1e-9 * std::max(1.0, std::abs(*oracle)));
        ++optimal;
    }
    CHECK(optimal >= 100);
    CHECK(infeasible > 0);
}

TEST_CASE("dual control LP matches the primal") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int k = 0; k < 30; ++k) {
        ControlLP c;
        c.species = {0, 1, 2};
        for (int l = 0; l < 20; ++l) {
            std::vector<double> x{u(rng), u(rng), u(rng)};
            double s = (x[0] + 0.5 * x[1] - 0.3 * x[2] + (k % 3 == 0 ? u(rng) - 1.0 : 0.0)) >= 1.0 ? 1.0 : -1.0;
            for (auto& v : x) v *= s;
            c.rows.push_back(x);
            c.signs.push_back(s);
        }
        auto dual = solve_control_lp(c);
        auto primal = simplex_solve(control_lp_primal(c));
        REQUIRE(dual.status == LpStatus::Optimal);
        REQUIRE(primal.status == LpStatus::Optimal);
        CHECK(dual.epsilon == doctest::Approx(primal.objective).epsilon(1e-7));
    }
}
