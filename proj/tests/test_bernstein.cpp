// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "bpcalc/bernstein.hpp"

using namespace bpcalc;

namespace {

RealPoint pt(std::initializer_list<double> v) { return RealPoint(v); }
ComplexPoint cpt(std::initializer_list<cdouble> v) { return ComplexPoint(v); }

} // namespace

TEST_CASE("stable quadrature matches trivial values")
{
    auto psi = make_stable(0.5, pt({1.0}));
    REQUIRE(psi.is_T0());
    // -(-(-1))^{1/2} = -1
    REQUIRE(psi.eval_real(pt({-1.0})) == Catch::Approx(-1.0).margin(1e-8));
    // T0 normalization at 0
    REQUIRE(psi.eval_real(pt({0.0})) == Catch::Approx(0.0).margin(1e-12));
    // s -> -0 limit along the diagonal
    REQUIRE(std::abs(psi.eval_real(pt({-1e-8}))) < 1e-3);
}

TEST_CASE("gamma quadrature hits -log 2 at s = -1")
{
    auto psi = make_gamma(pt({1.0}));
    REQUIRE(psi.eval_real(pt({-1.0})) == Catch::Approx(-std::log(2.0)).margin(1e-8));
    REQUIRE(psi.closed_form_eval(to_complex(pt({-1.0}))).real() ==
            Catch::Approx(-std::log(2.0)).margin(1e-14));
}

TEST_CASE("stable quadrature on the imaginary axis")
{
    auto psi = make_stable(0.5, pt({1.0}));
    const cdouble z(0.0, 1.0);
    const cdouble got = psi.eval_complex(cpt({z}));
    const cdouble expect = -principal_pow(-z, 0.5);
    REQUIRE(std::abs(got - expect) < 1e-6);
}

TEST_CASE("atom measure transform is exact")
{
    RealPoint v = pt({0.7, 1.3});
    auto psi = make_atoms(2, {{v, 1.0}});
    const cdouble il(0.0, 0.4);
    const cdouble got = psi.eval_complex(cpt({il, il}));
    const cdouble expect = std::exp(il * (v[0] + v[1])) - 1.0;
    REQUIRE(std::abs(got - expect) < 1e-14);
}

TEST_CASE("multidimensional stable ray")
{
    auto psi = make_stable(0.5, pt({1.0, 1.0}));
    REQUIRE(psi.eval_real(pt({-1.0, -1.0})) == Catch::Approx(-std::sqrt(2.0)).margin(1e-7));
    auto psi1 = make_stable(0.5, pt({1.0}));
    REQUIRE(psi1.eval_real(pt({-4.0})) == Catch::Approx(-2.0).margin(1e-6));
}

TEST_CASE("quadrature consistency across closed-form families")
{
    // |quadrature - closed form| <= 1e-6 on a 1e3-point grid of [-10,-0.01]
    auto stable = make_stable(0.5, pt({1.0}));
    auto stable3 = make_stable(0.3, pt({1.0}));
    auto stable7 = make_stable(0.7, pt({1.0}));
    auto gam = make_gamma(pt({1.0}));
    for (const auto& psi : {stable, stable3, stable7, gam}) {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double s = -10.0 + (10.0 - 0.01) * double(i) / 999.0;
            const double q = psi.eval_real(pt({s}));
            const double c = psi.closed_form_eval(to_complex(pt({s}))).real();
            worst = std::max(worst, std::abs(q - c));
        }
        INFO("family closed-form residual " << worst);
        REQUIRE(worst < 1e-6);
    }
}

TEST_CASE("example1 divided difference vs pushforward quadrature")
{
    // psi1(s) = e^s - 1: mu1 = delta_1
    auto psi1 = make_atoms(1, {{pt({1.0}), 1.0}});
    auto psi = make_example1(psi1);
    REQUIRE(psi.n() == 2);

    const double expect = (std::exp(-1.0) - std::exp(-2.0)) / 1.0 - 1.0;
    REQUIRE(psi.eval_real(pt({-1.0, -2.0})) == Catch::Approx(expect).margin(1e-10));
    REQUIRE(psi.closed_form_eval(to_complex(pt({-1.0, -2.0}))).real() ==
            Catch::Approx(expect).margin(1e-12));

    // diagonal: psi(s,s) = psi1'(s) - omega = e^s - 1
    const double d = psi.closed_form_eval(to_complex(pt({-1.0, -1.0}))).real();
    REQUIRE(d == Catch::Approx(std::exp(-1.0) - 1.0).margin(1e-9));
    REQUIRE(psi.eval_real(pt({0.0, 0.0})) == Catch::Approx(0.0).margin(1e-12));

    // 20 sample agreement at 1e-6 between the two routes
    for (int i = 0; i < 20; ++i) {
        const double s1 = -0.1 - 0.45 * i;
        const double s2 = -9.3 + 0.41 * i;
        const double quad = psi.eval_real(pt({s1, s2}));
        const double divd = psi.closed_form_eval(to_complex(pt({s1, s2}))).real();
        REQUIRE(std::abs(quad - divd) < 1e-6);
    }
}

TEST_CASE("example1 with gamma base uses quadrature omega")
{
    auto base = make_gamma(pt({1.0}));
    auto psi = make_example1(base);
    // omega = int v v^-1 e^-v dv = 1;  psi(s1,s2) = (log(1-s2)-log(1-s1))/(s1-s2)... divided difference
    const double s1 = -1.0, s2 = -3.0;
    const double expect = (-std::log(1 - s1) + std::log(1 - s2)) / (s1 - s2) - 1.0;
    REQUIRE(psi.closed_form_eval(to_complex(pt({s1, s2}))).real() == Catch::Approx(expect).margin(1e-9));
    REQUIRE(psi.eval_real(pt({s1, s2})) == Catch::Approx(expect).margin(1e-7));
}

TEST_CASE("example1 rejects infinite omega")
{
    auto base = make_stable(0.5, pt({1.0}));
    REQUIRE_THROWS_AS(make_example1(base), parameter_error);
}

TEST_CASE("linear combinations")
{
    auto s2 = make_stable(0.5, pt({1.0}));
    auto s3 = make_stable(1.0 / 3.0, pt({1.0}));

    auto same = linear_combine({{1.0, s2}, {0.0, s3}});
    REQUIRE(same.eval_real(pt({-2.0})) == Catch::Approx(s2.eval_real(pt({-2.0}))).margin(1e-14));

    auto twice = linear_combine({{2.0, s2}});
    REQUIRE(twice.eval_real(pt({-1.0})) == Catch::Approx(-2.0).margin(1e-7));

    auto both = linear_combine({{1.0, s2}, {1.0, s3}});
    REQUIRE(both.eval_real(pt({-1.0})) == Catch::Approx(-2.0).margin(1e-8));
    REQUIRE(both.closed_form_eval(to_complex(pt({-1.0}))).real() == Catch::Approx(-2.0).margin(1e-12));

    REQUIRE_THROWS_AS(linear_combine({{-1.0, s2}}), parameter_error);
}

TEST_CASE("cone law at machine tolerance")
{
    auto s2 = make_stable(0.5, pt({1.0}));
    auto gm = make_gamma(pt({1.0}));
    auto combo = linear_combine({{0.7, s2}, {1.3, gm}});
    for (double s : {-0.3, -1.1, -4.7}) {
        const double lhs = combo.eval_real(pt({s}));
        const double rhs = 0.7 * s2.eval_real(pt({s})) + 1.3 * gm.eval_real(pt({s}));
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12 * (1.0 + std::abs(rhs))));
    }
}

TEST_CASE("conjugate symmetry of eval_complex")
{
    auto psi = make_stable(0.5, pt({1.0}));
    auto gam = make_gamma(pt({1.0}));
    for (const auto& f : {psi, gam}) {
        for (int i = 0; i < 8; ++i) {
            const cdouble z(-0.3 * i, 0.7 * i - 2.0);
            const cdouble a = f.eval_complex(cpt({z}));
            const cdouble b = f.eval_complex(cpt({std::conj(z)}));
            REQUIRE(std::abs(a - std::conj(b)) < 1e-9);
        }
    }
}

TEST_CASE("decay to zero along the diagonal is monotone")
{
    for (const auto& psi : {make_stable(0.5, pt({1.0})), make_gamma(pt({1.0}))}) {
        double prev = -1e300;
        for (double s : {-2.0, -1.0, -0.5, -0.25, -0.125, -1e-2, -1e-4}) {
            const double v = psi.eval_real(pt({s}));
            REQUIRE(v >= prev - 1e-12);
            REQUIRE(v <= 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("monotonicity probe")
{
    std::vector<RealPoint> grid;
    for (double s = -10.0; s <= -0.1; s += 0.5) grid.push_back(pt({s}));

    auto stable = make_stable(0.5, pt({1.0}));
    REQUIRE(monotonicity_probe(stable, grid).pass);

    auto atom = make_atoms(1, {{pt({2.0}), 1.0}});
    REQUIRE(monotonicity_probe(atom, grid).pass);

    struct RawSquare {
        double eval_real(const RealPoint& s) const { return s[0] * s[0]; }
    } raw;
    REQUIRE_FALSE(monotonicity_probe(raw, grid).pass);
}

TEST_CASE("domain and parameter errors")
{
    REQUIRE_THROWS_AS(make_stable(1.2, pt({1.0})), parameter_error);
    REQUIRE_THROWS_AS(make_stable(0.0, pt({1.0})), parameter_error);
    auto psi = make_stable(0.5, pt({1.0}));
    REQUIRE_THROWS_AS(psi.eval_complex(cpt({cdouble(0.5, 0.0)})), domain_error);
    REQUIRE_THROWS_AS(psi.eval_real(pt({1.0})), domain_error);
}

TEST_CASE("json round trip")
{
    auto base = make_atoms(1, {{pt({1.0}), 1.0}});
    for (const auto& psi : {make_stable(0.4, pt({1.0, 2.0})), make_gamma(pt({1.0})),
                            make_example1(base),
                            linear_combine({{0.5, make_stable(0.5, pt({1.0}))},
                                            {2.0, make_gamma(pt({1.0}))}})}) {
        auto j = psi.to_json();
        auto back = BernsteinFunction::from_json(j);
        for (double s : {-0.5, -2.0}) {
            RealPoint p(psi.n(), s);
            REQUIRE(back.eval_real(p) == Catch::Approx(psi.eval_real(p)).margin(1e-12));
        }
    }
}

TEST_CASE("integrability functional is finite for the families")
{
    REQUIRE(std::isfinite(make_stable(0.5, pt({1.0})).measure().integrability_functional()));
    REQUIRE(std::isfinite(make_gamma(pt({1.0})).measure().integrability_functional()));
}
