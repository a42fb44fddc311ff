// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "bpcalc/fft.hpp"

#include <random>

using namespace bpcalc;

namespace {

// naive O(N^2) DFT oracle
std::vector<cdouble> naive_dft(const std::vector<cdouble>& x, int sign)
{
    const std::size_t n = x.size();
    std::vector<cdouble> out(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t k = 0; k < n; ++k) {
        cdouble s = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = sign * 2.0 * pi * double(k * m % n) / double(n);
            s += x[m] * cdouble(std::cos(ang), std::sin(ang));
        }
        out[k] = s;
    }
    return out;
}

} // namespace

TEST_CASE("forward fft matches naive dft")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t n : {8u, 64u, 256u}) {
        std::vector<cdouble> x(n);
        for (auto& v : x) v = cdouble(u(rng), u(rng));
        auto a = x;
        fft_forward(a);
        auto b = naive_dft(x, -1);
        for (std::size_t i = 0; i < n; ++i)
            REQUIRE(std::abs(a[i] - b[i]) < 1e-10 * double(n));
    }
}

TEST_CASE("inverse fft round trip")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cdouble> x(1024);
    for (auto& v : x) v = cdouble(u(rng), u(rng));
    auto a = x;
    fft_forward(a);
    fft_inverse(a);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(a[i] - x[i]) < 1e-12);
}

TEST_CASE("fft rejects non power of two")
{
    std::vector<cdouble> x(12);
    REQUIRE_THROWS_AS(fft_forward(x), std::invalid_argument);
}

TEST_CASE("2-d fft matches separable naive dft")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t r = 8, c = 16;
    std::vector<cdouble> x(r * c);
    for (auto& v : x) v = cdouble(u(rng), u(rng));

    auto a = x;
    fft_nd_forward(a, {r, c});

    // transform rows then columns with the 1-d naive oracle
    std::vector<cdouble> t(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        std::vector<cdouble> row(c);
        for (std::size_t j = 0; j < c; ++j) row[j] = x[i * c + j];
        auto fr = naive_dft(row, -1);
        for (std::size_t j = 0; j < c; ++j) t[i * c + j] = fr[j];
    }
    for (std::size_t j = 0; j < c; ++j) {
        std::vector<cdouble> col(r);
        for (std::size_t i = 0; i < r; ++i) col[i] = t[i * c + j];
        auto fc = naive_dft(col, -1);
        for (std::size_t i = 0; i < r; ++i) t[i * c + j] = fc[i];
    }
    for (std::size_t i = 0; i < r * c; ++i) REQUIRE(std::abs(a[i] - t[i]) < 1e-10);
}
