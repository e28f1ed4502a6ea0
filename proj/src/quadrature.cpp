#include "varheat/quadrature.hpp"

#include <map>
#include <mutex>

namespace varheat {

// ---------------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------------

static GaussRule make_gauss(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev start, Newton on P_n
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.x[i] = x;
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

const GaussRule& gauss_rule(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
    return it->second;
}

// ---------------------------------------------------------------------------
// adaptive Simpson
// ---------------------------------------------------------------------------

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol_abs, double tol_rel, int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    double tol = std::max(tol_abs, tol_rel * std::abs(whole));
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double integrate_panels(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breaks, double tol_abs, double tol_rel) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    double prev = a;
    for (double c : breaks) {
        if (c <= prev || c > b) continue;
        total += adaptive_simpson(f, prev, c, tol_abs, tol_rel);
        prev = c;
    }
    return total;
}

// ---------------------------------------------------------------------------
// meshes
// ---------------------------------------------------------------------------

std::vector<double> graded_mesh(double T, int M) {
    std::vector<double> t(M + 1);
    for (int j = 0; j <= M; ++j) t[j] = T * sqr(double(j) / M);
    return t;
}

std::vector<double> log_mesh(double a, double b, int n) {
    std::vector<double> v(n);
    double la = std::log(a), lb = std::log(b);
    for (int i = 0; i < n; ++i) v[i] = std::exp(la + (lb - la) * i / double(n - 1));
    return v;
}

// ---------------------------------------------------------------------------
// product integration weights
// ---------------------------------------------------------------------------

std::vector<double> product_weights(const std::vector<double>& s, double a, double b) {
    const std::size_t J = s.size() - 1;
    const double t = s[J];
    std::vector<double> W(J + 1, 0.0);
    if (J == 0) return W;
    const GaussRule& gr = gauss_rule(8);

    if (J == 1 && s[0] == 0.0) {
        // both endpoints singular: exact Beta moments
        double m0 = std::pow(t, 1.0 - a - b) * beta_function(1.0 - b, 1.0 - a);
        double m1 = std::pow(t, 1.0 - a - b) * beta_function(2.0 - b, 1.0 - a);
        W[0] = m0 - m1;
        W[1] = m1;
        return W;
    }

    auto accumulate = [&](std::size_t l, double mu0, double mu1) {
        W[l] += mu0 - mu1;
        W[l + 1] += mu1;
    };

    for (std::size_t l = 0; l < J; ++l) {
        double s0 = s[l], s1 = s[l + 1];
        double len = s1 - s0;
        double mu0 = 0.0, mu1 = 0.0;
        if (l == 0 && s0 == 0.0 && b > 0.0) {
            // s = s1 * v^{1/(1-b)}:  s^{-b} ds = s1^{1-b}/(1-b) dv
            double c = std::pow(s1, 1.0 - b) / (1.0 - b);
            for (std::size_t i = 0; i < gr.x.size(); ++i) {
                double v = 0.5 * (1.0 + gr.x[i]);
                double w = 0.5 * gr.w[i] * c;
                double sv = s1 * std::pow(v, 1.0 / (1.0 - b));
                double g = w * std::pow(t - sv, -a);
                double frac = sv / len;
                mu0 += g;
                mu1 += g * frac;
            }
        } else if (l == J - 1 && a > 0.0) {
            // t - s = (t - s0) * v^{1/(1-a)}
            double h0 = t - s0;
            double c = std::pow(h0, 1.0 - a) / (1.0 - a);
            for (std::size_t i = 0; i < gr.x.size(); ++i) {
                double v = 0.5 * (1.0 + gr.x[i]);
                double w = 0.5 * gr.w[i] * c;
                double sv = t - h0 * std::pow(v, 1.0 / (1.0 - a));
                double g = w * std::pow(sv, -b);
                double frac = (sv - s0) / len;
                mu0 += g;
                mu1 += g * frac;
            }
        } else {
            for (std::size_t i = 0; i < gr.x.size(); ++i) {
                double sv = 0.5 * (s0 + s1) + 0.5 * len * gr.x[i];
                double g = 0.5 * len * gr.w[i] * std::pow(t - sv, -a) * std::pow(sv, -b);
                double frac = (sv - s0) / len;
                mu0 += g;
                mu1 += g * frac;
            }
        }
        accumulate(l, mu0, mu1);
    }
    return W;
}

// ---------------------------------------------------------------------------
// pchip
// ---------------------------------------------------------------------------

void Pchip::build(std::vector<double> xs, std::vector<double> ys) {
    x = std::move(xs);
    y = std::move(ys);
    std::size_t n = x.size();
    d.assign(n, 0.0);
    if (n < 2) return;
    std::vector<double> h(n - 1), del(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        del[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = del[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (del[i - 1] * del[i] <= 0.0) {
            d[i] = 0.0;
        } else {
            double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) s = 0.0;
        else if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) s = 3.0 * d0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

double Pchip::operator()(double t) const {
    std::size_t n = x.size();
    if (t <= x.front()) return y.front() + d.front() * (t - x.front());
    if (t >= x.back()) return y.back() + d.back() * (t - x.back());
    std::size_t i = std::upper_bound(x.begin(), x.end(), t) - x.begin() - 1;
    double h = x[i + 1] - x[i], u = (t - x[i]) / h;
    double h00 = (1 + 2 * u) * sqr(1 - u), h10 = u * sqr(1 - u);
    double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1];
}

double Pchip::deriv(double t) const {
    std::size_t n = x.size();
    if (t <= x.front()) return d.front();
    if (t >= x.back()) return d.back();
    std::size_t i = std::upper_bound(x.begin(), x.end(), t) - x.begin() - 1;
    double h = x[i + 1] - x[i], u = (t - x[i]) / h;
    double g00 = 6 * u * (u - 1) / h, g10 = (3 * u - 1) * (u - 1);
    double g01 = -6 * u * (u - 1) / h, g11 = u * (3 * u - 2);
    return g00 * y[i] + g10 * d[i] + g01 * y[i + 1] + g11 * d[i + 1];
}

} // namespace varheat
