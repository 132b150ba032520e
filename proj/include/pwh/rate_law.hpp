#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pwh {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numeric scale times a product of parameter values.
struct Coef {
    double scale = 1.0;
    std::vector<int> params;

    double eval(std::span<const double> p) const;
    bool operator==(const Coef&) const = default;
};

struct Monomial {
    Coef coef;
    std::vector<std::pair<int, double>> powers;  // species index, exponent

    double eval(std::span<const double> u, std::span<const double> p) const;
    bool operator==(const Monomial&) const = default;
};

struct AffineTerm {
    Coef coef;
    int species = -1;  // -1: constant term
    bool operator==(const AffineTerm&) const = default;
};

// Sum of terms, each a coefficient optionally multiplied by one species.
struct AffineExpr {
    std::vector<AffineTerm> terms;

    double eval(std::span<const double> u, std::span<const double> p) const;
    // Terms sorted so that structurally equal expressions compare equal.
    AffineExpr canonical() const;
    bool structurally_equal(const AffineExpr& other) const;
    std::vector<int> species() const;
    std::vector<int> parameters() const;
    void validate(int n_species) const;
    bool operator==(const AffineExpr&) const = default;
};

// Numeric (w, h) form of an affine expression: value = w.u - h.
struct NumericAffine {
    std::vector<double> w;
    double h = 0.0;
};
NumericAffine to_numeric(const AffineExpr& e, int n_species, std::span<const double> p);

namespace law {

struct Constant {
    Coef k;
};

struct Mono {
    Monomial m;
};

struct MichaelisMenten {
    Monomial prefactor;
    AffineExpr x;
    int km = -1;
};

struct GoldbeterKoshland {
    Monomial prefactor;
    AffineExpr v1;
    AffineExpr v2;
    int j1 = -1;
    int j2 = -1;
};

struct SwitchedMonomial {
    int boolean = -1;
    Monomial on;
};

struct SwitchedLinear {
    int boolean = -1;
    Monomial prefactor;
    int k_sat = -1;
    int k_lin = -1;
    AffineExpr x;
};

// Linear branch of a Michaelis-Menten law kept on its own (never saturated).
struct Linear {
    Monomial prefactor;
    int k = -1;
    AffineExpr x;
};

}  // namespace law

using RateLaw = std::variant<law::Constant, law::Mono, law::MichaelisMenten, law::GoldbeterKoshland,
                             law::SwitchedMonomial, law::SwitchedLinear, law::Linear>;

std::string kind_name(const RateLaw& r);
bool is_switched(const RateLaw& r);
std::optional<int> boolean_of(const RateLaw& r);
std::vector<int> parameters_of(const RateLaw& r);

// Diagnostics counter for clamped GK discriminants, per thread.
long gk_clamp_count();
void reset_gk_clamp_count();

double eval_gk(double v1, double v2, double j1, double j2);
double eval_mm(double k, double km, double x);

// Substrate and v1/v2 expressions are clamped at zero here, since trial
// Runge-Kutta stages can dip slightly below the nonnegative orthant.
double eval_rate(const RateLaw& r, std::span<const double> u, std::span<const int> s,
                 std::span<const double> p);

}  // namespace pwh
