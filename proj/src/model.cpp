#include "varheat/model.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace varheat {

// ---------------------------------------------------------------------------
// descriptors
// ---------------------------------------------------------------------------

double AlphaDescriptor::eval(const Point& x, int dim) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::RationalBump: {
            double r2 = sqr(x[0] - center[0]) + (dim == 2 ? sqr(x[1] - center[1]) : 0.0);
            return base + amplitude / (1.0 + r2);
        }
        case Kind::Tabulated: {
            if (tab_values.empty()) throw NumericsError("tabulated alpha: empty table");
            double u = (x[0] - tab_x0) / tab_dx;
            if (u <= 0.0) return tab_values.front();
            std::size_t n = tab_values.size();
            if (u >= double(n - 1)) return tab_values.back();
            std::size_t i = std::size_t(u);
            double f = u - double(i);
            return tab_values[i] * (1.0 - f) + tab_values[i + 1] * f;
        }
    }
    return value;
}

bool KappaDescriptor::x_constant() const {
    switch (kind) {
        case Kind::Constant: return true;
        case Kind::XBump: return amplitude == 0.0;
        case Kind::Separable: return kappa_b == 0.0;
    }
    return false;
}

bool KappaDescriptor::z_independent() const {
    return kind != Kind::Separable || hkind == HKind::One || kappa_b == 0.0;
}

double KappaDescriptor::eval_radial(const Point& x, double r, int dim) const {
    switch (kind) {
        case Kind::Constant:
            return value;
        case Kind::XBump: {
            double r2 = sqr(x[0] - center[0]) + (dim == 2 ? sqr(x[1] - center[1]) : 0.0);
            return base + amplitude / (1.0 + r2);
        }
        case Kind::Separable: {
            double g = 1.0 / (1.0 + sqr(x[0] - center[0]) + (dim == 2 ? sqr(x[1] - center[1]) : 0.0));
            double h = 1.0;
            if (hkind == HKind::Rational) h = 1.0 / (1.0 + r * r);
            else if (hkind == HKind::Gauss) h = std::exp(-r * r);
            return kappa0 + kappa_b * g * h;
        }
    }
    return value;
}

double KappaDescriptor::eval(const Point& x, const Point& z, int dim) const {
    return eval_radial(x, norm(z, dim), dim);
}

// ---------------------------------------------------------------------------
// canonical strings (provenance hashing)
// ---------------------------------------------------------------------------

std::string ModelSpec::canonical_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "d=" << dim << ";a.kind=" << int(alpha.kind) << ";a=" << alpha.value << ","
       << alpha.base << "," << alpha.amplitude << "," << alpha.center[0] << "," << alpha.center[1];
    os << ";a.tab=" << alpha.tab_x0 << "," << alpha.tab_dx;
    for (double v : alpha.tab_values) os << "," << v;
    os << ";k.kind=" << int(kappa.kind) << ";k=" << kappa.value << "," << kappa.base << ","
       << kappa.amplitude << "," << kappa.center[0] << "," << kappa.center[1] << ","
       << kappa.kappa0 << "," << kappa.kappa_b << "," << int(kappa.hkind);
    os << ";b=" << alpha_lo << "," << alpha_hi << "," << kappa_lo << "," << kappa_hi << ","
       << beta0 << "," << c_alpha << "," << c_kappa << ";zi=" << z_independent;
    return os.str();
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

void SpaceTimeGrid::validate() {
    if (t_nodes.empty()) throw NumericsError("grid: t_nodes empty");
    for (std::size_t i = 0; i < t_nodes.size(); ++i) {
        if (t_nodes[i] <= 0.0 || t_nodes[i] > 1.0) throw NumericsError("grid: t_nodes must lie in (0,1]");
        if (i > 0 && t_nodes[i] <= t_nodes[i - 1]) throw NumericsError("grid: t_nodes must ascend");
    }
    if (h <= 0.0) throw NumericsError("grid: h must be positive");
    if (x_max < 5.0) throw NumericsError("grid: X_max must be >= 5");
    if (dim != 1 && dim != 2) throw NumericsError("grid: dim must be 1 or 2");
    if (time_substeps < 4) throw NumericsError("grid: time_substeps must be >= 4");
    int n = int(std::floor(x_max / h + 0.5));
    x_nodes.resize(2 * n + 1);
    for (int i = -n; i <= n; ++i) x_nodes[i + n] = i * h;
}

std::size_t SpaceTimeGrid::lattice_size() const {
    std::size_t n = x_nodes.size();
    return dim == 1 ? n : n * n;
}

Point SpaceTimeGrid::lattice_point(std::size_t i) const {
    std::size_t n = x_nodes.size();
    if (dim == 1) return {x_nodes[i], 0.0};
    return {x_nodes[i / n], x_nodes[i % n]};
}

std::string SpaceTimeGrid::canonical_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "h=" << h << ";X=" << x_max << ";d=" << dim << ";M=" << time_substeps << ";t=";
    for (double t : t_nodes) os << t << ",";
    return os.str();
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

namespace {

std::string point_str(const Point& p, int dim) {
    std::ostringstream os;
    os.precision(6);
    os << "(" << p[0];
    if (dim == 2) os << "," << p[1];
    os << ")";
    return os.str();
}

} // namespace

ValidationReport validate_spec(const ModelSpec& spec, int samples, std::uint64_t seed) {
    if (samples < 1) throw NumericsError("validate_spec: samples must be >= 1");
    if (spec.dim != 1 && spec.dim != 2) throw NumericsError("dim must be 1 or 2");
    if (spec.alpha_hi >= 2.0) throw NumericsError("alpha_hi must be < 2");
    if (spec.alpha_lo <= 0.0) throw NumericsError("alpha_lo must be > 0");
    if (spec.alpha_lo > spec.alpha_hi) throw NumericsError("alpha_lo must be <= alpha_hi");
    if (spec.kappa_lo <= 0.0) throw NumericsError("kappa_lo must be > 0");
    if (spec.kappa_lo > spec.kappa_hi) throw NumericsError("kappa_lo must be <= kappa_hi");
    if (spec.beta0 <= 0.0 || spec.beta0 > 1.0) throw NumericsError("beta0 must lie in (0,1]");
    if (spec.alpha.kind == AlphaDescriptor::Kind::Tabulated && spec.alpha.tab_values.empty())
        throw NumericsError("alpha descriptor empty");
    if (spec.alpha.kind == AlphaDescriptor::Kind::Tabulated && spec.dim != 1)
        throw NumericsError("tabulated alpha supports d=1 only");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-8.0, 8.0);
    auto draw = [&]() -> Point { return {box(rng), spec.dim == 2 ? box(rng) : 0.0}; };

    ValidationReport rep;
    auto add = [&](ValidationItem it) { rep.items.push_back(std::move(it)); };

    { // alpha bounds
        ValidationItem it{"alpha_bounds", true, 0.0, "", "alpha_lo <= alpha(x) <= alpha_hi < 2"};
        for (int i = 0; i < samples; ++i) {
            Point x = draw();
            double a = spec.alpha_at(x);
            double viol = std::max(spec.alpha_lo - a, a - spec.alpha_hi);
            if (viol > it.worst_value) {
                it.worst_value = viol;
                it.worst_sample = point_str(x, spec.dim);
            }
        }
        it.pass = it.worst_value <= 1e-12;
        add(it);
    }
    { // alpha Hoelder
        ValidationItem it{"alpha_hoelder", true, 0.0, "",
                          "|alpha(x)-alpha(y)| <= c_alpha (|x-y|^beta0 ^ 1)"};
        for (int i = 0; i < samples; ++i) {
            Point x = draw(), y = draw();
            double lhs = std::abs(spec.alpha_at(x) - spec.alpha_at(y));
            double rhs = spec.c_alpha * std::min(std::pow(norm(x - y, spec.dim), spec.beta0), 1.0);
            double viol = lhs - rhs;
            if (viol > it.worst_value) {
                it.worst_value = viol;
                it.worst_sample = point_str(x, spec.dim) + point_str(y, spec.dim);
            }
        }
        it.pass = it.worst_value <= 1e-12;
        add(it);
    }
    { // kappa bounds + evenness
        ValidationItem it{"kappa_bounds", true, 0.0, "", "kappa_lo <= kappa(x,z) <= kappa_hi, even in z"};
        for (int i = 0; i < samples; ++i) {
            Point x = draw(), z = draw();
            double k = spec.kappa_at(x, z);
            Point mz{-z[0], -z[1]};
            double viol = std::max({spec.kappa_lo - k, k - spec.kappa_hi,
                                    std::abs(k - spec.kappa_at(x, mz))});
            if (viol > it.worst_value) {
                it.worst_value = viol;
                it.worst_sample = point_str(x, spec.dim) + point_str(z, spec.dim);
            }
        }
        it.pass = it.worst_value <= 1e-12;
        add(it);
    }
    { // kappa Hoelder in x
        ValidationItem it{"kappa_hoelder", true, 0.0, "",
                          "|kappa(x,z)-kappa(y,z)| <= c_kappa (|x-y|^beta0 ^ 1)"};
        for (int i = 0; i < samples; ++i) {
            Point x = draw(), y = draw(), z = draw();
            double lhs = std::abs(spec.kappa_at(x, z) - spec.kappa_at(y, z));
            double rhs = spec.c_kappa * std::min(std::pow(norm(x - y, spec.dim), spec.beta0), 1.0);
            double viol = lhs - rhs;
            if (viol > it.worst_value) {
                it.worst_value = viol;
                it.worst_sample = point_str(x, spec.dim) + point_str(y, spec.dim) + point_str(z, spec.dim);
            }
        }
        it.pass = it.worst_value <= 1e-12;
        add(it);
    }
    { // z-independent flag consistency
        ValidationItem it{"z_independent_flag", true, 0.0, "", "flag matches descriptor"};
        it.pass = (spec.z_independent == spec.kappa.z_independent());
        if (!it.pass) it.message = "z_independent flag inconsistent with kappa descriptor";
        add(it);
    }
    if (!spec.z_independent) {
        // Oscillation hypothesis for the z-dependent regime.
        ValidationItem it{"variable_order_hypothesis", true, 0.0, "",
                          "(alpha_hi/alpha_lo) - 1 < beta0**/alpha_hi"};
        double lhs = spec.alpha_hi / spec.alpha_lo - 1.0;
        double rhs = spec.beta0_hat() / spec.alpha_hi;
        it.worst_value = lhs - rhs;
        it.pass = lhs < rhs;
        if (!it.pass)
            it.message = "variable-order + z-dependent kappa outside Theorem 1.2 hypothesis";
        add(it);
    }

    rep.overall_pass = std::all_of(rep.items.begin(), rep.items.end(),
                                   [](const ValidationItem& i) { return i.pass; });
    return rep;
}

std::string ValidationReport::to_json() const {
    std::ostringstream os;
    os << "{\"overall_pass\":" << (overall_pass ? "true" : "false") << ",\"items\":[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        os << (i ? "," : "") << "{\"name\":\"" << it.name << "\",\"pass\":"
           << (it.pass ? "true" : "false") << ",\"worst_value\":" << it.worst_value
           << ",\"worst_sample\":\"" << it.worst_sample << "\",\"message\":\"" << it.message
           << "\"}";
    }
    os << "]}";
    return os.str();
}

// ---------------------------------------------------------------------------
// ball moduli
// ---------------------------------------------------------------------------

double alpha_modulus(const ModelSpec& spec, const Point& y, double s, BallExtreme which) {
    if (s < 0.0) throw NumericsError("alpha_modulus: s must be >= 0");
    double best = spec.alpha_at(y);
    if (s == 0.0) return best;
    const int n = (spec.dim == 1 ? 2 : 4) * 64;
    for (int i = 0; i < n; ++i) {
        Point z = y;
        if (spec.dim == 1) {
            z[0] = y[0] - s + 2.0 * s * i / double(n - 1);
        } else {
            // sunflower points on the disk
            double r = s * std::sqrt((i + 0.5) / n);
            double th = i * 2.399963229728653; // golden angle
            z[0] = y[0] + r * std::cos(th);
            z[1] = y[1] + r * std::sin(th);
        }
        double a = spec.alpha_at(z);
        best = which == BallExtreme::Sup ? std::max(best, a) : std::min(best, a);
    }
    return best;
}

} // namespace varheat
