// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace bpcalc {

// Principal-branch complex power (-z)^p for Re z <= 0, i.e. Re(-z) >= 0,
// so arg(-z) in [-pi/2, pi/2] and the cut is never touched.
inline std::complex<double> principal_pow(std::complex<double> base, double p)
{
    return std::exp(p * std::log(base));
}

// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a).
// Series for x < a+1, continued fraction otherwise (Lentz).
inline double gamma_p(double a, double x)
{
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // continued fraction for Q(a,x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

// Exponential integral E1(x) = int_x^inf e^-t / t dt,  x > 0.
inline double expint_e1(double x)
{
    if (x <= 0.0) throw std::invalid_argument("expint_e1: x must be positive");
    if (x <= 1.0) {
        // series: E1 = -gamma - ln x + sum (-1)^{k+1} x^k/(k k!)
        const double euler = 0.57721566490153286061;
        double sum = 0.0, term = 1.0;
        for (int k = 1; k <= 60; ++k) {
            term *= -x / double(k);
            sum -= term / double(k);
            if (std::fabs(term / double(k)) < 1e-18) break;
        }
        return -euler - std::log(x) + sum;
    }
    // Lentz continued fraction: E1 = e^-x / (x + 1/(1 + 1/(x + 2/(1 + ...))))
    const double tiny = 1e-300;
    double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 300; ++i) {
        const double an = -double(i) * double(i);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x);
}

// Gauss-Legendre nodes/weights on [-1,1], fixed orders used by the quadrature
// engine.  Newton iteration on Legendre polynomials; deterministic.
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n)
    {
        x.resize(n);
        w.resize(n);
        const double pi = 3.14159265358979323846;
        const int m = (n + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p1 / pp;
                if (std::fabs(z - z1) < 1e-15) break;
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
    }
};

inline const GaussLegendre& gauss_legendre_16()
{
    static const GaussLegendre g(16);
    return g;
}

} // namespace bpcalc
