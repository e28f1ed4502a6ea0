#pragma once

#include <string>

#include "varheat/model.hpp"

namespace varheat {

// ---------------------------------------------------------------------------
// The envelope family rho^{y,beta}_gamma and its eps-tail variant:
//   rho(t,x) = t^gamma (|x|^beta ^ 1) * { (t^{1/alpha(y)} + |x|)^{-d-alpha(y)},  |x| <= R
//                                       { |x|^{-(d+alpha_1-eps)},                |x| >  R
// R is normalised to 1; eps = 0 gives rho, eps > 0 the tilde variant.
// ---------------------------------------------------------------------------

struct RhoParams {
    double gamma = 0.0;
    double beta = 0.0;
    Point y = {0.0, 0.0};
    double eps = 0.0;
    double R = 1.0;
};

double rho(const RhoParams& params, const ModelSpec& spec, double t, const Point& x);

// convenience overload used throughout the estimates
double rho_val(const ModelSpec& spec, double gamma, double beta, const Point& y, double t,
               const Point& x, double eps = 0.0);

// ---------------------------------------------------------------------------
// inequality certification
// ---------------------------------------------------------------------------

struct FitReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;         // lhs / rhs
    double ratio_variant = 0.0; // secondary variant (frozen index / alpha_2-uniform)
    std::string params;
    std::string worst_case;
    std::string to_json() const;
};

// int rho_0^{z,beta}(t, x-z) dz  vs  (t^{beta/alpha(x)-1} v 1)(1 + |log t| 1_{beta=alpha(x)}).
// ratio: moving index alpha(z); ratio_variant: frozen index alpha(x).
FitReport check_mass_inequality(const ModelSpec& spec, double beta, double t, const Point& x,
                                double eps = 0.0);

// int rho^{z,b1}_{th1}(t-s, x-z) rho^{y,b2}_{th2}(s, z-y) dz against the
// four-term envelope; ratio: moving-index form, ratio_variant: alpha_2-uniform.
FitReport check_convolution_inequality(const ModelSpec& spec, double th1, double th2, double b1,
                                       double b2, double s, double t, const Point& x,
                                       const Point& y, double eps = 0.0);

// int_0^t int rho rho dz ds against the Beta-function envelope. variant 1 uses
// the local indices alpha(x), alpha(y); variant 2 the uniform alpha_2 form.
// Throws NumericsError when the hypothesis set of the chosen variant fails.
FitReport check_beta_time_integral(const ModelSpec& spec, double th1, double th2, double b1,
                                   double b2, double t, const Point& x, const Point& y,
                                   int variant, double eps = 0.0);

} // namespace varheat
