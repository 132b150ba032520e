#include <cmath>
#include <random>

#include <doctest.h>

#include "pwh/model_io.hpp"
#include "pwh/rate_law.hpp"

using namespace pwh;

TEST_CASE("gk matches high precision reference") {
    // mpmath, 50 digits: tests/oracles/gk_mpmath.py
    CHECK(eval_gk(1.0, 0.1, 0.01, 0.01) == doctest::Approx(0.9989011121855259).epsilon(1e-14));
    CHECK(eval_gk(0.1, 1.0, 0.01, 0.01) == doctest::Approx(0.0010988878144741161).epsilon(1e-12));
}

TEST_CASE("gk is one half on the diagonal") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> v(1e-3, 10.0), j(1e-4, 1.0);
    for (int i = 0; i < 200; ++i) {
        double a = v(rng), jj = j(rng);
        CHECK(std::abs(eval_gk(a, a, jj, jj) - 0.5) < 1e-12);
    }
}

TEST_CASE("gk is monotone in v1 and antitone in v2") {
    double prev = -1.0;
    for (int i = 0; i <= 200; ++i) {
        double g = eval_gk(i * 0.01, 1.0, 0.05, 0.02);
        CHECK(g >= prev);
        prev = g;
    }
    prev = 2.0;
    for (int i = 0; i <= 200; ++i) {
        double g = eval_gk(1.0, i * 0.01, 0.05, 0.02);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("gk limits and errors") {
    CHECK(eval_gk(0.0, 1.0, 0.01, 0.01) == 0.0);
    CHECK(eval_gk(1.0, 0.0, 0.01, 0.01) == doctest::Approx(1.0));
    CHECK_THROWS_AS(eval_gk(std::nan(""), 1.0, 0.1, 0.1), ModelError);
    reset_gk_clamp_count();
    CHECK(gk_clamp_count() == 0);
}

TEST_CASE("mm kinetics") {
    CHECK(eval_mm(2.0, 1.0, 1.0) == 1.0);
    CHECK(eval_mm(2.0, 1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(eval_mm(1.0, 1.0, -1e-3), ModelError);
    CHECK_THROWS_AS(eval_mm(1.0, std::nan(""), 1.0), ModelError);
}

TEST_CASE("affine expressions") {
    auto net = parse_model_string(R"(
[species]
A 1
B 2
[parameters]
k = 3
h = 0.5
[reactions]
r : A -> B : mm(k; 2*k*A + B - h; h)
)");
    const auto& mm = std::get<law::MichaelisMenten>(net.reactions[0].rate);
    std::vector<double> u{1.0, 2.0};
    auto p = net.parameter_values();
    CHECK(mm.x.eval(u, p) == doctest::Approx(2 * 3 * 1 + 2 - 0.5));
    auto num = to_numeric(mm.x, 2, p);
    CHECK(num.w[0] == doctest::Approx(6.0));
    CHECK(num.w[1] == doctest::Approx(1.0));
    CHECK(num.h == doctest::Approx(0.5));
    CHECK(mm.x.species() == std::vector<int>{0, 1});
    CHECK(mm.x.structurally_equal(mm.x.canonical()));
    CHECK(eval_rate(net.reactions[0].rate, u, {}, p) == doctest::Approx(3 * 7.5 / 8.0));
}

TEST_CASE("rate law kinds") {
    auto net = parse_model_string(R"(
[species]
A 1
[parameters]
k = 2
km = 0.5
kl = 4
[booleans]
b
[reactions]
c : -> A : const(k)
m : A -> : mono(k*A)
s : A -> : switched(b; k*A)
l : A -> : switched_linear(b; 1; k; kl; A)
n : A -> : linear(1; kl; A)
)");
    std::vector<double> u{0.25};
    auto p = net.parameter_values();
    std::vector<int> on{1}, off{0};
    CHECK(kind_name(net.reactions[0].rate) == "const");
    CHECK(eval_rate(net.reactions[2].rate, u, on, p) == doctest::Approx(0.5));
    CHECK(eval_rate(net.reactions[2].rate, u, off, p) == 0.0);
    CHECK(eval_rate(net.reactions[3].rate, u, on, p) == doctest::Approx(2.0));
    CHECK(eval_rate(net.reactions[3].rate, u, off, p) == doctest::Approx(1.0));
    CHECK(eval_rate(net.reactions[4].rate, u, off, p) == doctest::Approx(1.0));
    CHECK(is_switched(net.reactions[2].rate));
    CHECK(!is_switched(net.reactions[4].rate));
    CHECK(boolean_of(net.reactions[3].rate) == 0);
}
