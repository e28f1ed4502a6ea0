#include "varheat/rho.hpp"

#include <cmath>
#include <sstream>

#include "varheat/quadrature.hpp"

namespace varheat {

double rho(const RhoParams& p, const ModelSpec& spec, double t, const Point& x) {
    double r = norm(x, spec.dim);
    double head = std::pow(t, p.gamma) * std::min(std::pow(r, p.beta), 1.0);
    if (r <= p.R) {
        double ay = spec.alpha_at(p.y);
        return head * std::pow(std::pow(t, 1.0 / ay) + r, -double(spec.dim) - ay);
    }
    return head * std::pow(r, -(double(spec.dim) + spec.alpha_lo - p.eps));
}

double rho_val(const ModelSpec& spec, double gamma, double beta, const Point& y, double t,
               const Point& x, double eps) {
    RhoParams p{gamma, beta, y, eps, 1.0};
    return rho(p, spec, t, x);
}

std::string FitReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"name\":\"" << name << "\",\"lhs\":" << lhs << ",\"rhs\":" << rhs
       << ",\"ratio\":" << ratio << ",\"ratio_variant\":" << ratio_variant << ",\"params\":"
       << (params.empty() ? "{}" : params) << ",\"worst_case\":\"" << worst_case << "\"}";
    return os.str();
}

// ---------------------------------------------------------------------------
// spatial integrals of rho products
// ---------------------------------------------------------------------------

namespace {

constexpr double kFar = 60.0;

// d=1 integral of f over the line with forced breakpoints and an exact
// power-law far tail with exponent d+alpha_1-eps (heads are capped at 1).
double line_integral(const ModelSpec& spec, const std::function<double(double)>& f,
                     std::vector<double> breaks, double tail_coeff_pos, double tail_coeff_neg,
                     double tail_exp) {
    double v = integrate_panels(f, -kFar, kFar, std::move(breaks), 1e-13, 1e-8);
    v += (tail_coeff_pos + tail_coeff_neg) * std::pow(kFar, 1.0 - tail_exp) / (tail_exp - 1.0);
    return v;
}

double disk_integral(const ModelSpec& spec, const std::function<double(const Point&)>& f,
                     const std::vector<Point>& centers, double tail_coeff, double tail_exp) {
    // polar around the first center with angular averaging
    Point c = centers.front();
    const GaussRule& ang = gauss_rule(16);
    auto ring = [&](double r) {
        double m = 0.0;
        for (std::size_t k = 0; k < ang.x.size(); ++k) {
            double th = M_PI * (1.0 + ang.x[k]);
            m += 0.5 * ang.w[k] * f(pt(c[0] + r * std::cos(th), c[1] + r * std::sin(th)));
        }
        return m * 2.0 * M_PI * r * 0.5; // mean over angle times circumference
    };
    std::vector<double> breaks;
    for (const Point& p : centers) breaks.push_back(norm(p - c, 2) + 1.0);
    breaks.push_back(1.0);
    double v = integrate_panels(ring, 0.0, kFar, breaks, 1e-12, 1e-7);
    v += 2.0 * M_PI * tail_coeff * std::pow(kFar, 2.0 - tail_exp) / (tail_exp - 2.0);
    return v;
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

double log_factor(double t, bool active) { return active ? 1.0 + std::abs(std::log(t)) : 1.0; }

} // namespace

// ---------------------------------------------------------------------------
// Lemma-3.1-style mass bound
// ---------------------------------------------------------------------------

FitReport check_mass_inequality(const ModelSpec& spec, double beta, double t, const Point& x,
                                double eps) {
    if (beta < 0.0 || beta >= spec.alpha_hi)
        throw NumericsError("check_mass_inequality: beta must lie in [0, alpha_hi)");
    if (t <= 0.0 || t > 1.0) throw NumericsError("check_mass_inequality: t in (0,1]");

    double ax = spec.alpha_at(x);
    double tail_exp = double(spec.dim) + spec.alpha_lo - eps;

    double lhs_moving = 0.0, lhs_frozen = 0.0;
    if (spec.dim == 1) {
        auto fm = [&](double z) { return rho_val(spec, 0.0, beta, pt(z), t, pt(x[0] - z), eps); };
        auto ff = [&](double z) { return rho_val(spec, 0.0, beta, x, t, pt(x[0] - z), eps); };
        std::vector<double> breaks = {x[0] - 1.0, x[0] + 1.0, x[0]};
        lhs_moving = line_integral(spec, fm, breaks, 1.0, 1.0, tail_exp);
        lhs_frozen = line_integral(spec, ff, breaks, 1.0, 1.0, tail_exp);
    } else {
        auto fm = [&](const Point& z) { return rho_val(spec, 0.0, beta, z, t, x - z, eps); };
        auto ff = [&](const Point& z) { return rho_val(spec, 0.0, beta, x, t, x - z, eps); };
        lhs_moving = disk_integral(spec, fm, {x}, 1.0, tail_exp);
        lhs_frozen = disk_integral(spec, ff, {x}, 1.0, tail_exp);
    }

    double rhs = std::max(std::pow(t, beta / ax - 1.0), 1.0) * log_factor(t, near(beta, ax));

    FitReport rep;
    rep.name = "mass_inequality";
    rep.lhs = lhs_moving;
    rep.rhs = rhs;
    rep.ratio = lhs_moving / rhs;
    rep.ratio_variant = lhs_frozen / rhs;
    std::ostringstream os;
    os.precision(6);
    os << "{\"beta\":" << beta << ",\"t\":" << t << ",\"x\":" << x[0] << ",\"eps\":" << eps << "}";
    rep.params = os.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Lemma-3.2-style convolution bound
// ---------------------------------------------------------------------------

namespace {

struct ConvRhs {
    double moving = 0.0;
    double uniform = 0.0;
};

ConvRhs conv_rhs(const ModelSpec& spec, double th1, double th2, double b1, double b2, double s,
                 double t, const Point& x, const Point& y, double eps) {
    double ts = t - s;
    double ax = spec.alpha_at(x), ay = spec.alpha_at(y), a2 = spec.alpha_hi;
    auto assemble = [&](double a_x, double a_y) {
        double A = std::pow(ts, th1 + std::min((b1 + b2) / a_x, 1.0) - 1.0) * std::pow(s, th2) *
                       log_factor(ts, near(b1 + b2, a_x)) +
                   std::pow(ts, th1) * std::pow(s, th2 + std::min((b1 + b2) / a_y, 1.0) - 1.0) *
                       log_factor(s, near(b1 + b2, a_y));
        double B = std::pow(ts, th1 + std::min(b1 / a_x, 1.0) - 1.0) * std::pow(s, th2) *
                   log_factor(ts, near(b1, a_x));
        double C = std::pow(ts, th1) * std::pow(s, th2 + std::min(b2 / a_y, 1.0) - 1.0) *
                   log_factor(s, near(b2, a_y));
        return A * rho_val(spec, 0.0, 0.0, y, t, x - y, eps) +
               B * rho_val(spec, 0.0, b2, y, t, x - y, eps) +
               C * rho_val(spec, 0.0, b1, y, t, x - y, eps);
    };
    return {assemble(ax, ay), assemble(a2, a2)};
}

} // namespace

FitReport check_convolution_inequality(const ModelSpec& spec, double th1, double th2, double b1,
                                       double b2, double s, double t, const Point& x,
                                       const Point& y, double eps) {
    if (!(0.0 < s && s < t && t <= 1.0))
        throw NumericsError("check_convolution_inequality: need 0 < s < t <= 1");
    double ts = t - s;
    double tail_exp = double(spec.dim) + spec.alpha_lo - eps;

    double lhs = 0.0;
    if (spec.dim == 1) {
        auto f = [&](double z) {
            return rho_val(spec, th1, b1, pt(z), ts, pt(x[0] - z), eps) *
                   rho_val(spec, th2, b2, y, s, pt(z - y[0]), eps);
        };
        std::vector<double> breaks = {x[0] - 1.0, x[0] + 1.0, x[0], y[0] - 1.0, y[0] + 1.0, y[0]};
        // far tail: both factors on their power branches, |z|^{-2 tail_exp} decay
        double c_pos = std::pow(ts, th1) * std::pow(s, th2);
        lhs = integrate_panels(f, -kFar, kFar, breaks, 1e-14, 1e-8);
        lhs += 2.0 * c_pos * std::pow(kFar, 1.0 - 2.0 * tail_exp) / (2.0 * tail_exp - 1.0);
    } else {
        auto f = [&](const Point& z) {
            return rho_val(spec, th1, b1, z, ts, x - z, eps) *
                   rho_val(spec, th2, b2, y, s, z - y, eps);
        };
        double c_pos = std::pow(ts, th1) * std::pow(s, th2);
        lhs = disk_integral(spec, f, {x, y}, c_pos, 2.0 * tail_exp);
    }

    ConvRhs rhs = conv_rhs(spec, th1, th2, b1, b2, s, t, x, y, eps);

    FitReport rep;
    rep.name = "convolution_inequality";
    rep.lhs = lhs;
    rep.rhs = rhs.moving;
    rep.ratio = lhs / rhs.moving;
    rep.ratio_variant = lhs / rhs.uniform;
    std::ostringstream os;
    os.precision(6);
    os << "{\"th1\":" << th1 << ",\"th2\":" << th2 << ",\"b1\":" << b1 << ",\"b2\":" << b2
       << ",\"s\":" << s << ",\"t\":" << t << ",\"x\":" << x[0] << ",\"y\":" << y[0]
       << ",\"eps\":" << eps << "}";
    rep.params = os.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Corollary-3.3-style Beta envelope
// ---------------------------------------------------------------------------

FitReport check_beta_time_integral(const ModelSpec& spec, double th1, double th2, double b1,
                                   double b2, double t, const Point& x, const Point& y,
                                   int variant, double eps) {
    double ax = spec.alpha_at(x), ay = spec.alpha_at(y), a2 = spec.alpha_hi;
    double a_low = std::min(ax, ay), a_high = std::max(ax, ay);
    if (variant == 1) {
        if (!(b1 + b2 < a_low && th1 + b1 / ax > 0.0 && th2 + b2 / ay > 0.0))
            throw NumericsError("beta_time_integral: variant 1 hypothesis violated");
    } else {
        if (!(b1 + b2 < a2 && th1 + b1 / a2 > 0.0 && th2 + b2 / a2 > 0.0))
            throw NumericsError("beta_time_integral: variant 2 hypothesis violated "
                                "(e.g. b1+b2 >= alpha_hi)");
    }

    // inner spatial integral as in check_convolution_inequality
    auto inner = [&](double s) {
        double ts = t - s;
        double tail_exp = double(spec.dim) + spec.alpha_lo - eps;
        if (spec.dim == 1) {
            auto f = [&](double z) {
                return rho_val(spec, th1, b1, pt(z), ts, pt(x[0] - z), eps) *
                       rho_val(spec, th2, b2, y, s, pt(z - y[0]), eps);
            };
            std::vector<double> breaks = {x[0] - 1.0, x[0] + 1.0, x[0],
                                          y[0] - 1.0, y[0] + 1.0, y[0]};
            double v = integrate_panels(f, -kFar, kFar, breaks, 1e-14, 1e-7);
            v += 2.0 * std::pow(ts, th1) * std::pow(s, th2) *
                 std::pow(kFar, 1.0 - 2.0 * tail_exp) / (2.0 * tail_exp - 1.0);
            return v;
        }
        auto f = [&](const Point& z) {
            return rho_val(spec, th1, b1, z, ts, x - z, eps) *
                   rho_val(spec, th2, b2, y, s, z - y, eps);
        };
        return disk_integral(spec, f, {x, y}, std::pow(ts, th1) * std::pow(s, th2),
                             2.0 * tail_exp);
    };

    // graded substitution absorbing both endpoint power singularities
    const int q = 8;
    auto half = [&](bool low) {
        return adaptive_simpson([&](double sig) {
            double u = std::pow(sig, q);
            double s = low ? 0.5 * t * u : t - 0.5 * t * u;
            double jac = 0.5 * t * q * std::pow(sig, q - 1);
            double val = (s <= 0.0 || s >= t) ? 0.0 : inner(s);
            return val * jac;
        }, 0.0, 1.0, 1e-12, 2e-5);
    };
    double lhs = half(true) + half(false);

    double B, env;
    if (variant == 1) {
        B = beta_function(b1 / a2 + th1, b2 / a2 + th2);
        env = rho_val(spec, th1 + th2 + (b1 + b2) / a_high, 0.0, y, t, x - y, eps) +
              rho_val(spec, th1 + th2 + b1 / ax, b2, y, t, x - y, eps) +
              rho_val(spec, th1 + th2 + b2 / ay, b1, y, t, x - y, eps);
    } else {
        B = beta_function(b1 / a2 + th1, b2 / a2 + th2);
        env = rho_val(spec, th1 + th2 + (b1 + b2) / a2, 0.0, y, t, x - y, eps) +
              rho_val(spec, th1 + th2 + b1 / a2, b2, y, t, x - y, eps) +
              rho_val(spec, th1 + th2 + b2 / a2, b1, y, t, x - y, eps);
    }
    double rhs = B * env;

    FitReport rep;
    rep.name = variant == 1 ? "beta_time_integral_local" : "beta_time_integral_uniform";
    rep.lhs = lhs;
    rep.rhs = rhs;
    rep.ratio = lhs / rhs;
    std::ostringstream os;
    os.precision(6);
    os << "{\"th1\":" << th1 << ",\"th2\":" << th2 << ",\"b1\":" << b1 << ",\"b2\":" << b2
       << ",\"t\":" << t << ",\"x\":" << x[0] << ",\"y\":" << y[0] << ",\"variant\":" << variant
       << "}";
    rep.params = os.str();
    return rep;
}

} // namespace varheat
