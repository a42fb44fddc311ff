// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "bpcalc/subordinator.hpp"

using namespace bpcalc;

namespace {

RealPoint pt(std::initializer_list<double> v) { return RealPoint(v); }

// one-sided 1/2-stable (Levy) cell masses via the erfc CDF
std::vector<double> stable_half_cells(double t, double U, std::size_t N)
{
    std::vector<double> out(N);
    auto cdf = [&](double u) { return u <= 0.0 ? 0.0 : std::erfc(t / (2.0 * std::sqrt(u))); };
    const double h = U / double(N);
    double prev = 0.0;
    for (std::size_t m = 0; m < N; ++m) {
        const double cur = cdf(double(m + 1) * h);
        out[m] = cur - prev;
        prev = cur;
    }
    return out;
}

// Gamma(t,1) cell masses by per-cell quadrature of the density (independent of
// the library's incomplete-gamma code path): substitute u = x^{1/t} so the
// integrand is bounded near zero.
std::vector<double> gamma_cells(double t, double U, std::size_t N)
{
    const auto& g = gauss_legendre_16();
    const double h = U / double(N);
    const double norm = 1.0 / std::tgamma(t);
    std::vector<double> out(N, 0.0);
    auto mass_sub = [&](double a, double b) { // int_{a}^{b} u^{t-1} e^{-u} du via u = x^{1/t}
        const double xa = std::pow(a, t), xb = std::pow(b, t);
        double acc = 0.0;
        const int panels = 8;
        for (int q = 0; q < panels; ++q) {
            const double pa = xa + (xb - xa) * q / panels;
            const double pb = xa + (xb - xa) * (q + 1) / panels;
            const double c = 0.5 * (pa + pb), hw = 0.5 * (pb - pa);
            for (int i = 0; i < 16; ++i) {
                const double x = c + hw * g.x[i];
                acc += g.w[i] * hw * std::exp(-std::pow(x, 1.0 / t)) / t;
            }
        }
        return acc;
    };
    auto mass_plain = [&](double a, double b) {
        const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
        double acc = 0.0;
        for (int i = 0; i < 16; ++i) {
            const double u = c + hw * g.x[i];
            acc += g.w[i] * hw * std::pow(u, t - 1.0) * std::exp(-u);
        }
        return acc;
    };
    for (std::size_t m = 0; m < N; ++m) {
        const double a = double(m) * h, b = double(m + 1) * h;
        if (a > 60.0) break;
        out[m] = norm * (m < 64 ? mass_sub(a, b) : mass_plain(a, b));
    }
    return out;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

std::vector<ExponentialPolynomial> battery10(int n)
{
    // fixed 10-polynomial battery on (-inf,0)^n
    std::vector<ExponentialPolynomial> out;
    for (int i = 0; i < 10; ++i) {
        const int terms = 1 + i % 3;
        std::vector<ExpTerm> ts(terms);
        for (int j = 0; j < terms; ++j) {
            ts[j].coef = cdouble(0.3 + 0.2 * ((i + j) % 4), 0.1 * ((i * 7 + j) % 3));
            ts[j].decay.assign(n, -(0.25 + 0.35 * ((i + 2 * j) % 5)));
        }
        out.emplace_back(n, std::move(ts));
    }
    return out;
}

} // namespace

TEST_CASE("compute_nu at t = 0 is the unit atom at the origin")
{
    auto psi = make_stable(0.5, pt({1.0}));
    auto nu = compute_nu(psi, 0.0);
    REQUIRE(nu.weights()[0] == 1.0);
    REQUIRE(nu.total_mass() == 1.0);
}

TEST_CASE("stable subordinator density inversion vs Levy oracle")
{
    auto psi = make_stable(0.5, pt({1.0}));
    for (double t : {0.5, 1.0, 2.0}) {
        auto nu = compute_nu(psi, t);
        auto oracle = stable_half_cells(t, nu.U(), nu.per_axis());
        const double l1 = l1_distance(nu.weights(), oracle);
        INFO("t=" << t << " U=" << nu.U() << " L1=" << l1 << " defect=" << nu.defect());
        REQUIRE(l1 < 1e-3);
        REQUIRE(nu.total_mass() + nu.defect() == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("gamma subordinator inversion vs Gamma(t,1) oracle")
{
    auto psi = make_gamma(pt({1.0}));
    for (double t : {0.5, 1.0, 2.0}) {
        auto nu = compute_nu(psi, t);
        auto oracle = gamma_cells(t, nu.U(), nu.per_axis());
        const double l1 = l1_distance(nu.weights(), oracle);
        INFO("t=" << t << " U=" << nu.U() << " L1=" << l1 << " defect=" << nu.defect()
                  << " ref=" << nu.info().reference_used);
        REQUIRE(l1 < 1e-3);
        REQUIRE(nu.total_mass() + nu.defect() == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("Laplace round trip across families and t")
{
    for (const auto& psi : {make_stable(0.5, pt({1.0})), make_gamma(pt({1.0}))}) {
        for (double t : {0.25, 0.5, 1.0, 2.0}) {
            auto nu = compute_nu(psi, t);
            double worst = 0.0;
            for (int i = 0; i < 20; ++i) {
                const double s = -5.0 * double(i) / 19.0;
                const cdouble pair = pair_exponential(nu, to_complex(pt({s})), &psi);
                const cdouble expect = std::exp(t * psi.value(to_complex(pt({s}))));
                worst = std::max(worst, std::abs(pair - expect));
            }
            INFO("family roundtrip worst t=" << t << ": " << worst);
            REQUIRE(worst < 1e-4);
        }
    }
}

TEST_CASE("convolution semigroup law")
{
    InversionOptions opt;
    opt.points = std::size_t(1) << 15;
    for (const auto& psi : {make_stable(0.5, pt({1.0})), make_gamma(pt({1.0}))}) {
        InversionOptions o1 = opt;
        // common grid for both t values
        const double U = std::max(sub_detail::auto_window(psi, 0.5, opt.points, opt.theta, opt.trunc_tol,
                                                          opt.defect_target, false),
                                  sub_detail::auto_window(psi, 1.0, opt.points, opt.theta, opt.trunc_tol,
                                                          opt.defect_target, false));
        o1.U = U;
        auto nu_half = compute_nu(psi, 0.5, o1);
        auto nu_one = compute_nu(psi, 1.0, o1);
        auto conv = convolve(nu_half, nu_half);
        const double tv = l1_distance(conv.weights(), nu_one.weights());
        INFO("U=" << U << " TV=" << tv);
        REQUIRE(tv <= 5e-3);
    }
}

TEST_CASE("convolution identity and commutativity")
{
    auto psi = make_gamma(pt({1.0}));
    InversionOptions opt;
    opt.points = 1 << 12;
    opt.U = 32.0;
    auto nu = compute_nu(psi, 1.0, opt);
    auto delta = GridMeasure::delta0(1, nu.per_axis(), nu.U());

    auto same = convolve(nu, delta);
    double dev = l1_distance(same.weights(), nu.weights());
    REQUIRE(dev < 1e-12);

    auto ab = convolve(nu, same);
    auto ba = convolve(same, nu);
    REQUIRE(ab.weights() == ba.weights()); // bit-exact
}

TEST_CASE("grid mismatch raises shape error")
{
    auto psi = make_gamma(pt({1.0}));
    InversionOptions a, b;
    a.points = 1 << 10;
    a.U = 32.0;
    b.points = 1 << 10;
    b.U = 64.0;
    auto na = compute_nu(psi, 1.0, a);
    auto nb = compute_nu(psi, 1.0, b);
    REQUIRE_THROWS_AS(convolve(na, nb), shape_error);
}

TEST_CASE("derivative measure: signed mass, pairing and finite differences")
{
    auto psi = make_stable(0.5, pt({1.0}));
    const double t = 1.0;
    auto dnu = compute_nu_derivative(psi, t);

    // total signed mass ~ psi(0) e^{t psi(0)} = 0
    REQUIRE(std::fabs(dnu.total_signed_mass()) < 1e-6);

    // Laplace probe at z = -1
    const cdouble probe = pair_exponential(dnu, to_complex(pt({-1.0})));
    const cdouble ps = psi.value(to_complex(pt({-1.0})));
    REQUIRE(std::abs(probe - ps * std::exp(t * ps)) < 1e-6);

    // central-difference oracle in TV distance on a shared grid
    InversionOptions opt;
    opt.U = dnu.U();
    const double delta = 1e-3;
    auto hi = compute_nu(psi, t + delta, opt);
    auto lo = compute_nu(psi, t - delta, opt);
    double tv = 0.0;
    for (std::size_t m = 0; m < dnu.weights().size(); ++m) {
        const double fd = (hi.weights()[m] - lo.weights()[m]) / (2.0 * delta);
        tv += std::fabs(dnu.weights()[m] - fd);
    }
    INFO("TV(p_t, central difference) = " << tv);
    REQUIRE(tv < 1e-3);
}

TEST_CASE("derivative tv norm is stable under refinement")
{
    auto psi = make_stable(0.5, pt({1.0}));
    InversionOptions coarse, fine;
    coarse.points = 1 << 14;
    fine.points = 1 << 15;
    auto a = compute_nu_derivative(psi, 1.0, coarse);
    fine.U = a.U();
    auto b = compute_nu_derivative(psi, 1.0, fine);
    REQUIRE(tv_norm(a) == Catch::Approx(tv_norm(b)).epsilon(0.01));
}

TEST_CASE("b_t closed form basics")
{
    auto psi = make_stable(0.5, pt({1.0}));
    ExponentialPolynomial single(1, {{cdouble(1.0, 0.0), {-2.0}}});
    const cdouble ps = psi.value(to_complex(pt({-2.0})));
    REQUIRE(std::abs(bt_closed_form(psi, 1.0, single) - std::exp(ps) * ps) < 1e-12);
    REQUIRE(std::abs(bt_closed_form(psi, 0.0, single) - ps) < 1e-12);
}

TEST_CASE("b_t identity: double integral vs closed form on the battery")
{
    auto polys = battery10(1);
    for (const auto& psi : {make_stable(0.5, pt({1.0})), make_gamma(pt({1.0}))}) {
        for (double t : {0.5, 1.0}) {
            auto nu = compute_nu(psi, t);
            for (const auto& p : polys) {
                const cdouble closed = bt_closed_form(psi, t, p);
                const cdouble dbl = bt_double_integral(psi, nu, p);
                const double err = std::abs(dbl - closed);
                INFO("t=" << t << " closed=" << std::abs(closed) << " err=" << err);
                REQUIRE(err <= 1e-3 * (1.0 + std::abs(closed)));
            }
        }
    }
}

TEST_CASE("derivative pairing agrees with b_t closed form on the battery")
{
    auto polys = battery10(1);
    for (const auto& psi : {make_stable(0.5, pt({1.0})), make_gamma(pt({1.0}))}) {
        for (double t : {0.5, 1.0}) {
            auto dnu = compute_nu_derivative(psi, t);
            for (const auto& p : polys) {
                const cdouble closed = bt_closed_form(psi, t, p);
                const cdouble paired = pair_polynomial(dnu, p);
                REQUIRE(std::abs(paired - closed) <= 1e-3 * (1.0 + std::abs(closed)));
            }
        }
    }
}

TEST_CASE("b_t with a single atom reduces to one shift")
{
    auto psi = make_atoms(1, {{pt({0.5}), 1.0}});
    auto nu = compute_nu(psi, 1.0);
    ExponentialPolynomial p(1, {{cdouble(1.0, 0.0), {-1.0}}});
    const cdouble dbl = bt_double_integral(psi, nu, p);
    // int (p(r + 1/2) - p(r)) d nu = (e^{-1/2} - 1) * L(nu)(-1)
    const cdouble L = pair_exponential(nu, to_complex(pt({-1.0})), &psi);
    REQUIRE(std::abs(dbl - (std::exp(-0.5) - 1.0) * L) < 1e-12);

    ExponentialPolynomial zero(1, {});
    REQUIRE(std::abs(bt_double_integral(psi, nu, zero)) == 0.0);
}

TEST_CASE("compound poisson path for finite measures")
{
    // mu = delta_1: nu_t = e^{-t} sum t^k/k! delta_k
    auto psi = make_atoms(1, {{pt({1.0}), 1.0}});
    auto nu = compute_nu(psi, 1.0);
    const double h = nu.h();
    REQUIRE(nu.info().origin_cell_weight == Catch::Approx(std::exp(-1.0)).margin(1e-12));
    // atom at u = 1 sits in cell floor(1/h)
    const std::size_t cell1 = std::size_t(1.0 / h);
    REQUIRE(nu.weights()[cell1] == Catch::Approx(std::exp(-1.0)).margin(1e-9));
    // Laplace roundtrip
    double worst = 0.0;
    for (double s : {-0.5, -1.0, -3.0}) {
        const cdouble pair = pair_exponential(nu, to_complex(pt({s})), &psi);
        const cdouble expect = std::exp(psi.value(to_complex(pt({s}))));
        worst = std::max(worst, std::abs(pair - expect));
    }
    REQUIRE(worst < 1e-4);
}

TEST_CASE("estimate_K basics")
{
    auto psi = make_stable(0.5, pt({1.0}));
    auto nu = compute_nu(psi, 1.0);

    KSearchOptions zero;
    zero.budget = 0;
    const auto base = estimate_K(psi, nu, zero);
    REQUIRE(base.lower_bound > 0.0);

    KSearchOptions some;
    some.budget = 40;
    const auto more = estimate_K(psi, nu, some);
    REQUIRE(more.lower_bound >= base.lower_bound);

    KSearchOptions big;
    big.budget = 80;
    const auto biggest = estimate_K(psi, nu, big);
    REQUIRE(biggest.lower_bound >= more.lower_bound);

    // determinism
    const auto again = estimate_K(psi, nu, big);
    REQUIRE(again.lower_bound == biggest.lower_bound);
}

TEST_CASE("weak continuity probe")
{
    auto psi = make_stable(0.5, pt({1.0}));
    std::vector<ExponentialPolynomial> tests;
    tests.emplace_back(1, std::vector<ExpTerm>{{cdouble(1.0, 0.0), {-1.0}}});
    tests.emplace_back(1, std::vector<ExpTerm>{{cdouble(0.5, 0.5), {-2.5}}});

    auto rep = weak_continuity_probe(psi, 1.0, tests);
    REQUIRE(rep.pass);

    auto rep0 = weak_continuity_probe(psi, 0.0, tests);
    REQUIRE(rep0.pass);

    auto vac = weak_continuity_probe(psi, 1.0, {});
    REQUIRE(vac.pass);
}

TEST_CASE("tv norm basics")
{
    auto psi = make_stable(0.5, pt({1.0}));
    auto nu = compute_nu(psi, 1.0);
    SignedGridMeasure s(1, nu.per_axis(), nu.U(), nu.weights());
    REQUIRE(tv_norm(s) == Catch::Approx(1.0).margin(nu.defect() + 1e-6));

    SignedGridMeasure zero(1, 16, 1.0, std::vector<double>(16, 0.0));
    REQUIRE(tv_norm(zero) == 0.0);
}

TEST_CASE("compute_nu rejects non-T0 and bad parameters")
{
    BernsteinFunction with_c0(1, -0.5, pt({0.0}), LevyMeasure::make_gamma(pt({1.0})));
    REQUIRE_FALSE(with_c0.is_T0());
    REQUIRE_THROWS_AS(compute_nu(with_c0, 1.0), parameter_error);

    auto psi = make_gamma(pt({1.0}));
    REQUIRE_THROWS_AS(compute_nu(psi, -1.0), parameter_error);
    InversionOptions opt;
    opt.points = 1000; // not a power of two
    REQUIRE_THROWS_AS(compute_nu(psi, 1.0, opt), parameter_error);
}

TEST_CASE("grid measure json round trip")
{
    auto psi = make_gamma(pt({1.0}));
    InversionOptions opt;
    opt.points = 1 << 10;
    auto nu = compute_nu(psi, 1.0, opt);
    auto j = nu.to_json();
    auto back = GridMeasure::from_json(j);
    REQUIRE(back.weights() == nu.weights());
    REQUIRE(back.U() == nu.U());
    REQUIRE(back.defect() == nu.defect());
}
