#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "varheat/common.hpp"

namespace varheat {

// ---------------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------------

struct GaussRule {
    std::vector<double> x; // nodes on (-1,1)
    std::vector<double> w;
};

// Newton iteration on Legendre polynomials; cached per order.
const GaussRule& gauss_rule(int n);

template <class F>
double gauss(const F& f, double a, double b, int n = 16) {
    const GaussRule& r = gauss_rule(n);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(mid + half * r.x[i]);
    return s * half;
}

// Adaptive Simpson with absolute/relative stopping.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol_abs = 1e-10, double tol_rel = 1e-9, int max_depth = 24);

// Integrate over [a,b] with forced breakpoints (integration restarts at each),
// adaptive inside every panel. Breakpoints outside (a,b) are ignored.
double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breaks, double tol_abs = 1e-10, double tol_rel = 1e-9);

// ---------------------------------------------------------------------------
// graded / log meshes
// ---------------------------------------------------------------------------

// t_j = T (j/M)^2, j=0..M
std::vector<double> graded_mesh(double T, int M);

// n log-spaced points on [a,b], a>0
std::vector<double> log_mesh(double a, double b, int n);

// ---------------------------------------------------------------------------
// product integration:  I = int_0^t (t-s)^{-a} s^{-b} G(s) ds
//
// G is piecewise linear on the mesh 0 = s_0 < ... < s_J = t, with data
// G_l = F(s_l) * (t-s_l)^a * s_l^b  (the caller hands over F values; the
// endpoint regularised values G_0, G_J must be supplied by the caller as the
// finite limits of that product). Weight moments on the end panels absorb the
// singular factor by the substitutions s = s_1 v^{1/(1-b)} and
// t - s = (t - s_{J-1}) v^{1/(1-a)}, which render the transformed integrand
// smooth; interior panels use plain Gauss.
//
// Returns weights W_l such that I ~= sum_l W_l * G_l.
// Requires a < 1, b < 1.
// ---------------------------------------------------------------------------
std::vector<double> product_weights(const std::vector<double>& s, double a, double b);

// ---------------------------------------------------------------------------
// interpolation
// ---------------------------------------------------------------------------

// Shape-preserving cubic (Fritsch-Carlson) on a strictly increasing mesh.
struct Pchip {
    std::vector<double> x, y, d; // d = node slopes
    void build(std::vector<double> xs, std::vector<double> ys);
    double operator()(double t) const;
    double deriv(double t) const;
    bool empty() const { return x.empty(); }
};

// Catmull-Rom on a uniform grid y_i = f(x0 + i*dx); clamped at the ends.
inline double cubic_uniform(const std::vector<double>& y, double x0, double dx, double x) {
    double u = (x - x0) / dx;
    if (u <= 0) return y.front();
    std::size_t n = y.size();
    if (u >= double(n - 1)) return y.back();
    std::size_t i = std::size_t(u);
    double f = u - double(i);
    if (i == 0 || i + 2 >= n) { // linear at the edges
        return y[i] * (1 - f) + y[i + 1] * f;
    }
    double ym = y[i - 1], y0 = y[i], y1 = y[i + 1], y2 = y[i + 2];
    double a0 = y0;
    double a1 = 0.5 * (y1 - ym);
    double a2 = ym - 2.5 * y0 + 2.0 * y1 - 0.5 * y2;
    double a3 = 0.5 * (y2 - ym) + 1.5 * (y0 - y1);
    return a0 + f * (a1 + f * (a2 + f * a3));
}

// log Gamma / Beta
inline double beta_function(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

} // namespace varheat
