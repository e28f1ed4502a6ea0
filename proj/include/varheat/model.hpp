#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varheat/common.hpp"

namespace varheat {

// ---------------------------------------------------------------------------
// Closed parametric families for the index function alpha(x) and the jump
// coefficient kappa(x,z). Keeping these declarative makes the Hoelder checks
// meaningful and the config files reproducible.
// ---------------------------------------------------------------------------

struct AlphaDescriptor {
    enum class Kind { Constant, RationalBump, Tabulated };
    Kind kind = Kind::Constant;

    // constant
    double value = 1.0;
    // rational bump: a + b / (1 + |x - c|^2)
    double base = 1.0, amplitude = 0.0;
    Point center = {0.0, 0.0};
    // tabulated on a 1-d lattice, linear interpolation, clamped outside
    double tab_x0 = 0.0, tab_dx = 1.0;
    std::vector<double> tab_values;

    double eval(const Point& x, int dim) const;
    bool is_constant() const { return kind == Kind::Constant; }
};

struct KappaDescriptor {
    enum class Kind { Constant, XBump, Separable };
    Kind kind = Kind::Constant;

    double value = 1.0;
    // x-only bump: base + amplitude / (1 + |x - c|^2)
    double base = 1.0, amplitude = 0.0;
    Point center = {0.0, 0.0};
    // separable: kappa0 + kappa_b * g(x) * h(|z|),
    //   g(x) = 1 / (1 + |x - c|^2),  h one of {one, rational, gauss}
    enum class HKind { One, Rational, Gauss };
    double kappa0 = 1.0, kappa_b = 0.0;
    HKind hkind = HKind::One;

    double eval(const Point& x, const Point& z, int dim) const;
    // radial profile at fixed x (kappa is even in z for every family member)
    double eval_radial(const Point& x, double r, int dim) const;
    bool x_constant() const;       // kappa(x,z) == kappa(z) for all x
    bool z_independent() const;    // kappa(x,z) == kappa(x)
};

// ---------------------------------------------------------------------------
// ModelSpec: the pair (alpha, kappa) with its stated bounds and Hoelder data.
// Immutable after construction; evaluations are pure.
// ---------------------------------------------------------------------------

struct ModelSpec {
    int dim = 1;
    AlphaDescriptor alpha;
    KappaDescriptor kappa;

    double alpha_lo = 0.0, alpha_hi = 0.0; // alpha_1, alpha_2
    double kappa_lo = 0.0, kappa_hi = 0.0; // kappa_1, kappa_2
    double beta0 = 1.0;                    // beta_1 ^ beta_2
    double c_alpha = 0.0, c_kappa = 0.0;   // Hoelder constants
    bool z_independent = true;

    double alpha_at(const Point& x) const { return alpha.eval(x, dim); }
    double kappa_at(const Point& x, const Point& z) const { return kappa.eval(x, z, dim); }

    double beta0_star() const { return std::min(beta0, alpha_hi); }            // beta_0^*
    double beta0_hat() const { return std::min(beta0, 0.5 * alpha_hi); }       // beta_0 ^ (alpha_2/2)
    bool alpha_is_constant() const { return alpha.is_constant(); }
    bool constant_coefficients() const { return alpha.is_constant() && kappa.x_constant(); }

    std::string canonical_string() const;
    std::uint64_t hash() const { return fnv1a64(canonical_string()); }
};

// ---------------------------------------------------------------------------

struct SpaceTimeGrid {
    std::vector<double> t_nodes; // ascending, in (0,1]
    double h = 0.1;              // lattice spacing
    double x_max = 10.0;         // box radius, >= 5
    int dim = 1;
    int time_substeps = 64;      // M for the graded product-integration mesh

    std::vector<double> x_nodes; // filled by validate()

    void validate();
    std::size_t lattice_size() const;
    // flattened lattice point (d=1: i -> x, d=2: row-major (ix,iy))
    Point lattice_point(std::size_t i) const;
    std::string canonical_string() const;
    std::uint64_t hash() const { return fnv1a64(canonical_string()); }
};

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

struct ValidationItem {
    std::string name;
    bool pass = false;
    double worst_value = 0.0;
    std::string worst_sample;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationItem> items;
    bool overall_pass = false;
    std::string to_json() const;
};

// Throws NumericsError on structurally invalid input (alpha_hi >= 2, ...).
// Sampled invariant violations land in the report instead.
ValidationReport validate_spec(const ModelSpec& spec, int samples, std::uint64_t seed = 7);

// sup / inf of alpha over the closed ball |z - y| <= s, by quasi-uniform
// sampling (2^d * 64 points plus the center).
enum class BallExtreme { Sup, Inf };
double alpha_modulus(const ModelSpec& spec, const Point& y, double s, BallExtreme which);

} // namespace varheat
