#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "varheat/model.hpp"

using namespace varheat;

namespace {

ModelSpec cauchy_model() {
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

ModelSpec varorder_model() {
    ModelSpec s;
    s.dim = 1;
    s.alpha.kind = AlphaDescriptor::Kind::RationalBump;
    s.alpha.base = 1.0;
    s.alpha.amplitude = 0.4;
    s.alpha.center = {0.0, 0.0};
    s.kappa.kind = KappaDescriptor::Kind::Constant;
    s.kappa.value = 1.0;
    s.alpha_lo = 1.0;
    s.alpha_hi = 1.4;
    s.kappa_lo = s.kappa_hi = 1.0;
    s.beta0 = 1.0;
    s.c_alpha = 0.3; // |alpha'| <= 0.4 * 3 sqrt(3) / 8 ~= 0.26
    s.c_kappa = 0.0;
    s.z_independent = true;
    return s;
}

} // namespace

TEST_CASE("constant model passes validation") {
    auto rep = validate_spec(cauchy_model(), 500);
    CHECK(rep.overall_pass);
}

TEST_CASE("rational bump model: extremes match the closed form") {
    // alpha(x) = 1 + 0.4/(1+x^2) has range (1, 1.4]
    auto spec = varorder_model();
    auto rep = validate_spec(spec, 2000);
    CHECK(rep.overall_pass);
    CHECK(spec.alpha_at(pt(0.0)) == doctest::Approx(1.4));
    CHECK(spec.alpha_at(pt(100.0)) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("alpha_hi >= 2 is rejected") {
    auto spec = cauchy_model();
    spec.alpha_hi = 2.0;
    CHECK_THROWS_WITH_AS(validate_spec(spec, 10), "alpha_hi must be < 2", NumericsError);
}

TEST_CASE("alpha_lo <= 0 and kappa_lo <= 0 are rejected") {
    auto spec = cauchy_model();
    spec.alpha_lo = 0.0;
    CHECK_THROWS_AS(validate_spec(spec, 10), NumericsError);
    spec = cauchy_model();
    spec.kappa_lo = 0.0;
    CHECK_THROWS_AS(validate_spec(spec, 10), NumericsError);
}

TEST_CASE("empty tabulated descriptor is rejected") {
    auto spec = cauchy_model();
    spec.alpha.kind = AlphaDescriptor::Kind::Tabulated;
    spec.alpha.tab_values.clear();
    CHECK_THROWS_AS(validate_spec(spec, 10), NumericsError);
}

TEST_CASE("z-dependent kappa outside the oscillation hypothesis is flagged") {
    ModelSpec s;
    s.dim = 1;
    s.alpha.kind = AlphaDescriptor::Kind::RationalBump;
    s.alpha.base = 0.6;
    s.alpha.amplitude = 0.9; // alpha_hi/alpha_lo - 1 = 1.5 large
    s.alpha_lo = 0.6;
    s.alpha_hi = 1.5;
    s.kappa.kind = KappaDescriptor::Kind::Separable;
    s.kappa.kappa0 = 1.0;
    s.kappa.kappa_b = 0.5;
    s.kappa.hkind = KappaDescriptor::HKind::Rational;
    s.kappa_lo = 0.9;
    s.kappa_hi = 1.6;
    s.beta0 = 1.0;
    s.c_alpha = 1.0;
    s.c_kappa = 0.6;
    s.z_independent = false;
    auto rep = validate_spec(s, 200);
    CHECK_FALSE(rep.overall_pass);
    bool found = false;
    for (const auto& it : rep.items)
        if (it.message.find("outside Theorem 1.2 hypothesis") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("ball moduli: constants, degenerate ball, bump maximum") {
    auto c = cauchy_model();
    CHECK(alpha_modulus(c, pt(0.7), 2.0, BallExtreme::Sup) == doctest::Approx(1.0));
    CHECK(alpha_modulus(c, pt(0.7), 2.0, BallExtreme::Inf) == doctest::Approx(1.0));

    auto v = varorder_model();
    CHECK(alpha_modulus(v, pt(3.0), 0.0, BallExtreme::Sup) ==
          doctest::Approx(v.alpha_at(pt(3.0))));
    // sup over [-1,1] of the bump is attained at 0
    CHECK(alpha_modulus(v, pt(0.0), 1.0, BallExtreme::Sup) == doctest::Approx(1.4).epsilon(1e-6));
    CHECK(alpha_modulus(v, pt(0.0), 1.0, BallExtreme::Inf) ==
          doctest::Approx(1.2).epsilon(1e-3)); // alpha(+-1) = 1.2
}

TEST_CASE("moduli are ordered, monotone in s, and Hoelder-bounded") {
    auto v = varorder_model();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-4.0, 4.0), us(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        Point y = pt(ud(rng));
        double s1 = us(rng), s2 = s1 + us(rng);
        double up1 = alpha_modulus(v, y, s1, BallExtreme::Sup);
        double lo1 = alpha_modulus(v, y, s1, BallExtreme::Inf);
        double up2 = alpha_modulus(v, y, s2, BallExtreme::Sup);
        double lo2 = alpha_modulus(v, y, s2, BallExtreme::Inf);
        double a = v.alpha_at(y);
        CHECK(lo1 <= a + 1e-12);
        CHECK(a <= up1 + 1e-12);
        CHECK(up1 <= up2 + 1e-12);
        CHECK(lo2 <= lo1 + 1e-12);
        CHECK(up1 - lo1 <= 2.0 * v.c_alpha * std::min(std::pow(s1, v.beta0), 1.0) + 1e-9);
    }
}

TEST_CASE("kappa evenness is exact for every built-in family") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-5.0, 5.0);
    std::vector<KappaDescriptor> descs(3);
    descs[0].kind = KappaDescriptor::Kind::Constant;
    descs[0].value = 0.7;
    descs[1].kind = KappaDescriptor::Kind::XBump;
    descs[1].base = 1.0;
    descs[1].amplitude = 0.5;
    descs[2].kind = KappaDescriptor::Kind::Separable;
    descs[2].kappa0 = 1.0;
    descs[2].kappa_b = 0.4;
    descs[2].hkind = KappaDescriptor::HKind::Gauss;
    for (const auto& k : descs) {
        for (int i = 0; i < 100; ++i) {
            Point x = pt(ud(rng), ud(rng)), z = pt(ud(rng), ud(rng));
            for (int dim : {1, 2}) {
                Point mz{-z[0], -z[1]};
                CHECK(k.eval(x, z, dim) == k.eval(x, mz, dim));
            }
        }
    }
}

TEST_CASE("grid invariants") {
    SpaceTimeGrid g;
    g.t_nodes = {0.25, 0.5, 1.0};
    g.h = 0.125;
    g.x_max = 5.0;
    g.validate();
    CHECK(g.x_nodes.size() == 81);
    CHECK(g.lattice_point(40)[0] == doctest::Approx(0.0));

    SpaceTimeGrid bad = g;
    bad.x_max = 3.0;
    CHECK_THROWS_AS(bad.validate(), NumericsError);
    bad = g;
    bad.t_nodes = {0.5, 0.25};
    CHECK_THROWS_AS(bad.validate(), NumericsError);
    bad = g;
    bad.t_nodes = {0.5, 1.5};
    CHECK_THROWS_AS(bad.validate(), NumericsError);
}

TEST_CASE("tabulated alpha interpolates and clamps") {
    ModelSpec s = cauchy_model();
    s.alpha.kind = AlphaDescriptor::Kind::Tabulated;
    s.alpha.tab_x0 = -1.0;
    s.alpha.tab_dx = 1.0;
    s.alpha.tab_values = {1.0, 1.2, 1.1};
    s.alpha_lo = 1.0;
    s.alpha_hi = 1.2;
    s.c_alpha = 0.5;
    s.beta0 = 1.0;
    CHECK(s.alpha_at(pt(-0.5)) == doctest::Approx(1.1));
    CHECK(s.alpha_at(pt(-7.0)) == doctest::Approx(1.0)); // clamped
    CHECK(s.alpha_at(pt(9.0)) == doctest::Approx(1.1));
}
