#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "varheat/model.hpp"
#include "varheat/stable_tables.hpp"

namespace varheat {

// ---------------------------------------------------------------------------
// DensitySlice: p^y(t, .) tabulated on a uniform radial grid, plus a fitted
// power-law tail coefficient for r beyond the grid. Only the z-dependent
// kappa path needs slices; the z-independent path evaluates the scaled
// standardised profile directly.
// ---------------------------------------------------------------------------

struct DensitySlice {
    double t = 0.0;
    Point y = {0.0, 0.0};
    double dr = 0.0;
    std::vector<double> values; // p(r_j), r_j = j * dr
    double tail_coeff = 0.0;    // p(r) ~ tail_coeff * r^{-d-alpha(y)}
    double alpha_y = 0.0;
    int dim = 1;

    double eval(double r) const;
    double mass() const; // trapezoidal mass + tail, diagnostic
};

// ---------------------------------------------------------------------------
// FrozenSymbol: characteristic exponent of the Levy process generated by the
// coefficients frozen at y.
// ---------------------------------------------------------------------------

struct FrozenSymbol {
    Point y = {0.0, 0.0};
    double alpha_y = 0.0;
    int dim = 1;
    bool exact_power_law = true;
    double multiplier = 0.0; // psi(xi) = multiplier * |xi|^alpha_y when exact

    // tabulated exponent on a uniform radial frequency grid (z-dependent kappa)
    double dxi = 0.0;
    std::vector<double> psi;
    double psi_tail_m = 0.0; // psi(xi) ~ psi_tail_m * xi^alpha_y beyond the grid
    double quad_error = 0.0;

    KappaDescriptor kappa; // frozen coefficient, needed for slice inversion
    std::shared_ptr<const StableFamily> family;

    double psi_at(double xi) const;

    struct SliceCache {
        std::mutex mtx;
        std::map<long long, std::shared_ptr<const DensitySlice>> by_time;
    };
    std::shared_ptr<SliceCache> cache = std::make_shared<SliceCache>();
};

// Builds the symbol. For z-independent kappa this is the exact power law
// psi(xi) = kappa(y) C(d, alpha(y)) |xi|^alpha(y); otherwise psi is computed
// by singular quadrature split at |z| = 1 and tabulated.
FrozenSymbol build_symbol(const ModelSpec& spec, const Point& y,
                          std::shared_ptr<const StableFamily> family = nullptr);

// p^y(t,x). Negative inversion ringing below 1e-8 * p^y(t,0) is clamped to 0;
// anything larger throws (reported with the offending radius at slice build).
double density(const FrozenSymbol& sym, double t, const Point& x);

// d/dt p^y(t,x); exact on the power-law path, centered difference on slices.
double density_dt(const FrozenSymbol& sym, double t, const Point& x);

// delta_{p^y}(t,x;z) = p^y(t,x+z) + p^y(t,x-z) - 2 p^y(t,x)
double second_difference(const FrozenSymbol& sym, double t, const Point& x, const Point& z);

struct GeneratorResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

// L^w p^y(t,.)(x) by symmetric second-difference quadrature: inner region
// |z| <= t^{1/alpha(y)} on a graded mesh, outer log mesh to Z_max = 50,
// analytic tail beyond. Throws if the internal error estimate exceeds tol.
GeneratorResult apply_frozen_generator(const ModelSpec& spec, const Point& w,
                                       const FrozenSymbol& sym, double t, const Point& x,
                                       double tol = 1e-3);

// int p^y(t, x - y) dy: the freeze point moves with the integration variable,
// so the mass is close to but not exactly 1 for variable coefficients.
double moving_mass(const ModelSpec& spec, const StableFamily& family, double t, const Point& x);

// |int p^y(t, x - y) dy - 1|
double near_unit_mass_defect(const ModelSpec& spec, const StableFamily& family, double t,
                             const Point& x);

} // namespace varheat
