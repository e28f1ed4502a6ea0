#pragma once

#include <memory>
#include <vector>

#include "varheat/common.hpp"

namespace varheat {

// C(d,alpha) = int (1 - cos<e,z>) |z|^{-d-alpha} dz, so that the jump kernel
// kappa / |z|^{d+alpha} with constant kappa has symbol kappa * C(d,alpha) * |xi|^alpha.
// C is the reciprocal of the usual fractional-Laplacian normalising constant.
double power_law_constant(int dim, double alpha);

// entire reciprocal Gamma (zero at the poles of Gamma)
double rgamma(double x);

// ---------------------------------------------------------------------------
// StableFamily
//
// Standardised symmetric alpha-stable profiles for the symbol e^{-|xi|^alpha}:
//   d=1: S(u) = (1/pi)      int_0^inf cos(u v)    e^{-v^alpha} dv
//   d=2: S(u) = (1/(2 pi))  int_0^inf J0(u v) v   e^{-v^alpha} dv
// plus the companion profile T with an extra v^alpha weight, which gives the
// exact time derivative:
//   p(t,x)      = (m t)^{-d/alpha} S(u),   u = (m t)^{-1/alpha} |x|
//   d/dt p(t,x) = -m (m t)^{-d/alpha - 1} T(u)
//
// Tables are uniform in u on [0, u_max]; beyond u_max a 3-term heavy-tail
// series evaluated at the exact alpha takes over. Interpolation is cubic in
// u and cubic across the alpha nodes.
// ---------------------------------------------------------------------------
class StableFamily {
public:
    static std::shared_ptr<const StableFamily> build(int dim, double alpha_lo, double alpha_hi);

    double density(double alpha, double u) const;    // S
    double dt_profile(double alpha, double u) const; // T
    double density_du(double alpha, double u) const; // dS/du

    int dim() const { return dim_; }
    double u_max() const { return du_ * (n_u_ - 1); }
    double du() const { return du_; }
    std::size_t n_u() const { return n_u_; }

    // tail series, public because verification uses them directly
    static double tail_S(int dim, double alpha, double u);
    static double tail_T(int dim, double alpha, double u);

private:
    StableFamily() = default;
    void build_1d();
    void build_2d();
    double interp(const std::vector<double>& tab, double alpha, double u, bool derivative) const;

    int dim_ = 1;
    std::vector<double> alphas_;
    double du_ = 0.0;
    std::size_t n_u_ = 0;
    std::vector<double> S_, T_; // [alpha_index * n_u + u_index]

    static constexpr double kAlphaFloor = 0.42;
};

} // namespace varheat
