#pragma once

#include <cmath>

#include "varheat/model.hpp"

namespace varheat::testing {

// d=1, alpha == 1, kappa == 1/pi: the generator is -(-Laplace)^{1/2} and the
// heat kernel is the Cauchy family t / (pi (t^2 + x^2)).
inline ModelSpec cauchy_model() {
    ModelSpec s;
    s.dim = 1;
    s.alpha.kind = AlphaDescriptor::Kind::Constant;
    s.alpha.value = 1.0;
    s.kappa.kind = KappaDescriptor::Kind::Constant;
    s.kappa.value = 1.0 / M_PI;
    s.alpha_lo = s.alpha_hi = 1.0;
    s.kappa_lo = s.kappa_hi = 1.0 / M_PI;
    s.beta0 = 1.0;
    s.c_alpha = 0.0;
    s.c_kappa = 0.0;
    s.z_independent = true;
    return s;
}

inline double cauchy_pdf(double t, double x) { return t / (M_PI * (t * t + x * x)); }

// variable-order test model: alpha(x) = 1 + 0.4/(1+x^2), kappa == kap
inline ModelSpec varorder_model(double kap = 1.0) {
    ModelSpec s;
    s.dim = 1;
    s.alpha.kind = AlphaDescriptor::Kind::RationalBump;
    s.alpha.base = 1.0;
    s.alpha.amplitude = 0.4;
    s.kappa.kind = KappaDescriptor::Kind::Constant;
    s.kappa.value = kap;
    s.alpha_lo = 1.0;
    s.alpha_hi = 1.4;
    s.kappa_lo = s.kappa_hi = kap;
    s.beta0 = 1.0;
    s.c_alpha = 0.3;
    s.c_kappa = 0.0;
    s.z_independent = true;
    return s;
}

// 2-d isotropic Cauchy: alpha == 1 with the exact fractional-Laplacian
// normalisation, density t / (2 pi (t^2+|x|^2)^{3/2})
inline ModelSpec cauchy2d_model() {
    ModelSpec s;
    s.dim = 2;
    s.alpha.kind = AlphaDescriptor::Kind::Constant;
    s.alpha.value = 1.0;
    s.kappa.kind = KappaDescriptor::Kind::Constant;
    // 1 / C(2,1) = alpha 2^{alpha-1} Gamma((alpha+d)/2) / (pi^{d/2} Gamma(1-alpha/2))
    s.kappa.value = std::tgamma(1.5) / (M_PI * std::tgamma(0.5));
    s.alpha_lo = s.alpha_hi = 1.0;
    s.kappa_lo = s.kappa_hi = s.kappa.value;
    s.beta0 = 1.0;
    s.c_alpha = 0.0;
    s.c_kappa = 0.0;
    s.z_independent = true;
    return s;
}

inline double cauchy2d_pdf(double t, double r) {
    return t / (2.0 * M_PI * std::pow(t * t + r * r, 1.5));
}

// z-dependent separable model small enough for smoke runs
inline ModelSpec zdep_model() {
    ModelSpec s;
    s.dim = 1;
    s.alpha.kind = AlphaDescriptor::Kind::RationalBump;
    s.alpha.base = 1.1;
    s.alpha.amplitude = 0.1;
    s.alpha_lo = 1.1;
    s.alpha_hi = 1.2;
    s.kappa.kind = KappaDescriptor::Kind::Separable;
    s.kappa.kappa0 = 1.0;
    s.kappa.kappa_b = 0.3;
    s.kappa.hkind = KappaDescriptor::HKind::Rational;
    s.kappa_lo = 1.0;
    s.kappa_hi = 1.3;
    s.beta0 = 1.0;
    s.c_alpha = 0.1;
    s.c_kappa = 0.3;
    s.z_independent = false;
    return s;
}

} // namespace varheat::testing
