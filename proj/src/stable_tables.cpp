#include "varheat/stable_tables.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "varheat/quadrature.hpp"

namespace varheat {

double power_law_constant(int dim, double alpha) {
    return std::pow(M_PI, 0.5 * dim) * std::tgamma(1.0 - 0.5 * alpha) /
           (alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (alpha + dim)));
}

double rgamma(double x) {
    if (x > 0.5) return 1.0 / std::tgamma(x);
    return std::sin(M_PI * x) * std::tgamma(1.0 - x) / M_PI;
}

// ---------------------------------------------------------------------------
// tails
// ---------------------------------------------------------------------------

double StableFamily::tail_S(int dim, double alpha, double u) {
    double s = 0.0;
    if (dim == 1) {
        double fact = 1.0;
        for (int k = 1; k <= 3; ++k) {
            fact *= k;
            s += (k % 2 ? 1.0 : -1.0) * std::tgamma(k * alpha + 1.0) *
                 std::sin(0.5 * k * M_PI * alpha) / fact * std::pow(u, -k * alpha - 1.0);
        }
        return s / M_PI;
    }
    double fact = 1.0;
    for (int k = 1; k <= 3; ++k) {
        fact *= k;
        s += (k % 2 ? -1.0 : 1.0) * std::pow(2.0, k * alpha + 1.0) *
             std::tgamma(1.0 + 0.5 * k * alpha) * rgamma(-0.5 * k * alpha) / fact *
             std::pow(u, -k * alpha - 2.0);
    }
    return s / (2.0 * M_PI); // leading term positive: (-1) * rgamma(-a/2) > 0
}

double StableFamily::tail_T(int dim, double alpha, double u) {
    if (dim == 1) {
        double s = 0.0, factm1 = 1.0;
        for (int k = 1; k <= 3; ++k) {
            if (k > 1) factm1 *= (k - 1);
            s += (k % 2 ? -1.0 : 1.0) * std::tgamma(k * alpha + 1.0) *
                 std::sin(0.5 * k * M_PI * alpha) / factm1 * std::pow(u, -k * alpha - 1.0);
        }
        return s / M_PI;
    }
    double s = 0.0, factm1 = 1.0;
    for (int k = 1; k <= 3; ++k) {
        if (k > 1) factm1 *= (k - 1);
        s += (k % 2 ? 1.0 : -1.0) * std::pow(2.0, k * alpha + 1.0) *
             std::tgamma(1.0 + 0.5 * k * alpha) * rgamma(-0.5 * k * alpha) / factm1 *
             std::pow(u, -k * alpha - 2.0);
    }
    return s / (2.0 * M_PI);
}

// ---------------------------------------------------------------------------
// d = 1: DCT-I inversion of e^{-v^alpha} on a shared frequency grid
// ---------------------------------------------------------------------------

namespace {
std::mutex g_fftw_mutex;
}

void StableFamily::build_1d() {
    const double u_keep = 64.0;
    // frequency cutoff: decay below 1e-16 for the slowest alpha, and at least
    // pi/0.02 so the u-grid resolves the density peak
    double xi_max = 157.0;
    for (double a : alphas_) xi_max = std::max(xi_max, 1.05 * std::pow(37.0, 1.0 / a));
    double dxi_target = 0.005;
    std::size_t N = 1;
    while (N < std::size_t(xi_max / dxi_target) && N < (1u << 21)) N <<= 1;
    double dxi = xi_max / double(N);
    du_ = M_PI / xi_max;
    n_u_ = std::size_t(u_keep / du_) + 1;
    S_.assign(alphas_.size() * n_u_, 0.0);
    T_.assign(alphas_.size() * n_u_, 0.0);

    std::vector<double> in(N + 1), out(N + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_r2r_1d(int(N + 1), in.data(), out.data(), FFTW_REDFT00, FFTW_ESTIMATE);
    }
    for (std::size_t ai = 0; ai < alphas_.size(); ++ai) {
        double a = alphas_[ai];
        for (std::size_t k = 0; k <= N; ++k) {
            double xi = k * dxi;
            in[k] = std::exp(-std::pow(xi, a));
        }
        fftw_execute(plan);
        for (std::size_t j = 0; j < n_u_; ++j) S_[ai * n_u_ + j] = dxi * out[j] / (2.0 * M_PI);

        for (std::size_t k = 0; k <= N; ++k) {
            double xi = k * dxi;
            double pa = std::pow(xi, a);
            in[k] = pa * std::exp(-pa);
        }
        fftw_execute(plan);
        for (std::size_t j = 0; j < n_u_; ++j) T_[ai * n_u_ + j] = dxi * out[j] / (2.0 * M_PI);
    }
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
}

// ---------------------------------------------------------------------------
// d = 2: Hankel quadrature, one Gauss panel per oscillation half-period
// ---------------------------------------------------------------------------

void StableFamily::build_2d() {
    const double u_keep = 24.0;
    du_ = 0.05;
    n_u_ = std::size_t(u_keep / du_) + 1;
    S_.assign(alphas_.size() * n_u_, 0.0);
    T_.assign(alphas_.size() * n_u_, 0.0);

    parallel_for(alphas_.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ai = lo; ai < hi; ++ai) {
            double a = alphas_[ai];
            double v_max = std::pow(38.0, 1.0 / a);
            for (std::size_t j = 0; j < n_u_; ++j) {
                double u = j * du_;
                double panel = (u < 0.5) ? v_max : std::min(v_max, M_PI / u);
                double s_acc = 0.0, t_acc = 0.0, v0 = 0.0;
                while (v0 < v_max) {
                    double v1 = std::min(v_max, v0 + panel);
                    s_acc += gauss([&](double v) {
                        return std::cyl_bessel_j(0.0, u * v) * v * std::exp(-std::pow(v, a));
                    }, v0, v1, 8);
                    t_acc += gauss([&](double v) {
                        double pa = std::pow(v, a);
                        return std::cyl_bessel_j(0.0, u * v) * v * pa * std::exp(-pa);
                    }, v0, v1, 8);
                    v0 = v1;
                }
                S_[ai * n_u_ + j] = s_acc / (2.0 * M_PI);
                T_[ai * n_u_ + j] = t_acc / (2.0 * M_PI);
            }
        }
    });
}

// ---------------------------------------------------------------------------

std::shared_ptr<const StableFamily> StableFamily::build(int dim, double alpha_lo, double alpha_hi) {
    if (alpha_lo < kAlphaFloor)
        throw NumericsError("stable table: alpha below numeric support floor 0.42");
    if (alpha_hi >= 2.0) throw NumericsError("stable table: alpha must be < 2");
    auto fam = std::shared_ptr<StableFamily>(new StableFamily());
    fam->dim_ = dim;
    if (alpha_hi - alpha_lo < 1e-12) {
        fam->alphas_ = {alpha_lo};
    } else {
        int n = std::clamp(int(std::ceil((alpha_hi - alpha_lo) / 0.0125)) + 1, 5, 65);
        fam->alphas_ = linspace(alpha_lo, alpha_hi, n);
    }
    if (dim == 1) fam->build_1d();
    else fam->build_2d();
    return fam;
}

double StableFamily::interp(const std::vector<double>& tab, double alpha, double u,
                            bool derivative) const {
    u = std::abs(u);
    const std::size_t na = alphas_.size();

    auto row_val = [&](std::size_t ai) {
        const double* row = tab.data() + ai * n_u_;
        double v = u / du_;
        std::size_t n = n_u_;
        if (v >= double(n - 1)) v = double(n - 1) - 1e-9;
        std::size_t i = std::size_t(v);
        double f = v - double(i);
        if (i == 0 || i + 2 >= n) {
            // symmetric extension at u=0 (profiles are even), linear at far end
            double ym = (i == 0) ? row[1] : row[i - 1];
            double y2 = (i + 2 >= n) ? row[n - 1] : row[i + 2];
            double a1 = 0.5 * (row[i + 1] - ym);
            double a2 = ym - 2.5 * row[i] + 2.0 * row[i + 1] - 0.5 * y2;
            double a3 = 0.5 * (y2 - ym) + 1.5 * (row[i] - row[i + 1]);
            if (derivative) return (a1 + f * (2 * a2 + 3 * f * a3)) / du_;
            return row[i] + f * (a1 + f * (a2 + f * a3));
        }
        double ym = row[i - 1], y0 = row[i], y1 = row[i + 1], y2 = row[i + 2];
        double a1 = 0.5 * (y1 - ym);
        double a2 = ym - 2.5 * y0 + 2.0 * y1 - 0.5 * y2;
        double a3 = 0.5 * (y2 - ym) + 1.5 * (y0 - y1);
        if (derivative) return (a1 + f * (2 * a2 + 3 * f * a3)) / du_;
        return y0 + f * (a1 + f * (a2 + f * a3));
    };

    if (na == 1) return row_val(0);

    double da = alphas_[1] - alphas_[0];
    double va = (alpha - alphas_[0]) / da;
    va = std::clamp(va, 0.0, double(na - 1) - 1e-12);
    std::size_t ia = std::size_t(va);
    double fa = va - double(ia);
    if (ia == 0 || ia + 2 >= na) {
        double y0 = row_val(ia), y1 = row_val(std::min(ia + 1, na - 1));
        return y0 * (1.0 - fa) + y1 * fa;
    }
    double ym = row_val(ia - 1), y0 = row_val(ia), y1 = row_val(ia + 1), y2 = row_val(ia + 2);
    double a1 = 0.5 * (y1 - ym);
    double a2 = ym - 2.5 * y0 + 2.0 * y1 - 0.5 * y2;
    double a3 = 0.5 * (y2 - ym) + 1.5 * (y0 - y1);
    return y0 + fa * (a1 + fa * (a2 + fa * a3));
}

double StableFamily::density(double alpha, double u) const {
    u = std::abs(u);
    if (u >= u_max()) return tail_S(dim_, alpha, u);
    return interp(S_, alpha, u, false);
}

double StableFamily::dt_profile(double alpha, double u) const {
    u = std::abs(u);
    if (u >= u_max()) return tail_T(dim_, alpha, u);
    return interp(T_, alpha, u, false);
}

double StableFamily::density_du(double alpha, double u) const {
    double au = std::abs(u);
    if (au >= u_max()) {
        double eps = 1e-4 * au;
        return (tail_S(dim_, alpha, au + eps) - tail_S(dim_, alpha, au - eps)) / (2 * eps) *
               (u < 0 ? -1.0 : 1.0);
    }
    return interp(S_, alpha, au, true) * (u < 0 ? -1.0 : 1.0);
}

} // namespace varheat
